//! `determinacy` command-line tool.
//!
//! Exit codes: 0 success, 1 bad input (config, arguments, files), 2 an
//! integrity failure or a failed verification suite. Output files are
//! staged and only renamed into place once every one of them is written.
//!
//! Angles given on the command line are in degrees.

mod output;
mod verify;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use determinacy::causal::{build_endqt_dag, chsh_from_correlators};
use determinacy::events::{EventKind, EventLog};
use determinacy::exec::Mode;
use determinacy::scenarios::{
    from_table, load_config, parse_table, run_with, set_path, Config, EprBellParams, OutputFormat, RunReport, Scenario,
};
use determinacy::structures::StructureGraph;
use determinacy::theories::{EnDqtParams, GrwParams, MwiVariant, RelationalVariant, TheoryEngine};
use determinacy::Error;
use output::{output_dir, Staged};

/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_DIR_VAR: &str = "DETERMINACY_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "determinacy",
    version,
    about = "Run determinacy scenarios under competing quantum theories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Run trials on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Rerun a config once per value of a dotted parameter path.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// e.g. `engine.grw.lambda`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
    },
    /// Write the final structure graph of an event log as DOT.
    ExportGraph {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an invariant suite (or `all`).
    Verify {
        suite: String,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Bell test on the singlet.
    Bell {
        /// grw, mwi, mwi-local, mwi-global, rqm, single-world or endqt.
        #[arg(long)]
        engine: String,
        /// a,a',b,b' in degrees.
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0,90,45,135")]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
}

enum Failure {
    Input(String),
    Integrity(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_integrity() {
            Failure::Integrity(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn io_fail(what: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", what.display()))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            format,
            sequential,
        } => cmd_run(&config, seed, trials, out.as_deref(), format, sequential),
        Command::Sweep {
            config,
            param,
            grid,
            seed,
            out,
            format,
        } => cmd_sweep(&config, &param, &grid, seed, out.as_deref(), format),
        Command::ExportGraph { log, out } => cmd_export(&log, &out),
        Command::Verify { suite, format } => cmd_verify(&suite, format),
        Command::Bell {
            engine,
            angles,
            trials,
            seed,
            format,
        } => cmd_bell(&engine, &angles, trials, seed, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Integrity(m)) => {
            eprintln!("integrity failure (this is a bug): {m}");
            ExitCode::from(2)
        }
    }
}

fn read_config(path: &Path) -> Result<String, Failure> {
    if !path.is_file() {
        return Err(Failure::Input(format!("config file {} does not exist", path.display())));
    }
    std::fs::read_to_string(path).map_err(io_fail(path))
}

fn with_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Config(_) => Failure::Input(format!("{}: {e}", path.display())),
        other => other.into(),
    }
}

/// Stages every output of one run under `dir/prefix.*`.
fn stage_report(
    staged: &mut Staged,
    dir: &Path,
    prefix: &str,
    r: &RunReport,
    format: OutputFormat,
) -> std::io::Result<()> {
    let at = |ext: &str| dir.join(format!("{prefix}.{ext}"));
    staged.add(at("events.jsonl"), &r.log.to_jsonl())?;
    let ext = match format {
        OutputFormat::Csv => "stats.csv",
        OutputFormat::Json => "stats.json",
    };
    staged.add(at(ext), &r.table(format))?;
    staged.add(at("graph.dot"), &r.graph.export_dot())?;
    staged.add(at("dstar.csv"), &r.reports_csv())?;
    if let Some(l) = &r.ledger {
        staged.add(
            at("ledger.json"),
            &serde_json::to_string_pretty(l).expect("ledger serializes"),
        )?;
    }
    Ok(())
}

fn mode(sequential: bool) -> Mode {
    if sequential {
        Mode::Sequential
    } else {
        Mode::Parallel
    }
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    out: Option<&Path>,
    format: Option<OutputFormat>,
    sequential: bool,
) -> Outcome {
    let cfg: Config = load_config(&read_config(path)?).map_err(with_path(path))?;
    let seed = seed.unwrap_or(cfg.seed);
    let trials = trials.unwrap_or(cfg.trials);
    let report = run_with(&cfg.scenario, &cfg.engine, trials, seed, mode(sequential))?;
    let dir = output_dir(out, cfg.output.dir.as_deref());
    let format = format.unwrap_or(cfg.output.format);
    let mut staged = Staged::default();
    stage_report(&mut staged, &dir, &cfg.output.prefix, &report, format).map_err(io_fail(&dir))?;
    for p in staged.commit().map_err(io_fail(&dir))? {
        println!("{}", p.display());
    }
    Ok(())
}

/// Integer-looking grid points stay integers so counts and seeds can be swept.
fn grid_value(s: &str) -> Result<toml::Value, Failure> {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Ok(toml::Value::Integer(i));
    }
    s.parse::<f64>()
        .map(toml::Value::Float)
        .map_err(|_| Failure::Input(format!("grid value \"{s}\" is not a number")))
}

fn cmd_sweep(
    path: &Path,
    param: &str,
    grid: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
    format: Option<OutputFormat>,
) -> Outcome {
    let text = read_config(path)?;
    let base = parse_table(&text).map_err(with_path(path))?;
    // Everything is validated before the first run.
    let mut points = Vec::with_capacity(grid.len());
    for g in grid {
        let mut table = base.clone();
        set_path(&mut table, param, grid_value(g)?).map_err(with_path(path))?;
        points.push((g.trim().to_string(), from_table(&table).map_err(with_path(path))?));
    }
    let first = &points.first().ok_or_else(|| Failure::Input("empty grid".into()))?.1;
    let dir = output_dir(out, first.output.dir.as_deref());
    let format = format.unwrap_or(first.output.format);
    let mut staged = Staged::default();
    let mut csv = String::new();
    let mut json = Vec::new();
    for (i, (value, cfg)) in points.iter().enumerate() {
        let report = run_with(
            &cfg.scenario,
            &cfg.engine,
            cfg.trials,
            seed.unwrap_or(cfg.seed),
            Mode::Parallel,
        )?;
        stage_report(
            &mut staged,
            &dir,
            &format!("{}.{i}", cfg.output.prefix),
            &report,
            format,
        )
        .map_err(io_fail(&dir))?;
        match format {
            OutputFormat::Csv => {
                let table = report.table(OutputFormat::Csv);
                let mut lines = table.lines();
                let header = lines.next().unwrap_or_default();
                if i == 0 {
                    let _ = writeln!(csv, "{param},{header}");
                }
                for l in lines {
                    let _ = writeln!(csv, "{value},{l}");
                }
            }
            OutputFormat::Json => {
                let table: serde_json::Value =
                    serde_json::from_str(&report.table(OutputFormat::Json)).expect("tables are JSON");
                json.push(serde_json::json!({ "param": param, "value": value, "table": table }));
            }
        }
    }
    let prefix = &first.output.prefix;
    match format {
        OutputFormat::Csv => staged.add(dir.join(format!("{prefix}.sweep.csv")), &csv),
        OutputFormat::Json => staged.add(
            dir.join(format!("{prefix}.sweep.json")),
            &serde_json::Value::Array(json).to_string(),
        ),
    }
    .map_err(io_fail(&dir))?;
    for p in staged.commit().map_err(io_fail(&dir))? {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_export(log_path: &Path, out: &Path) -> Outcome {
    let text = std::fs::read_to_string(log_path).map_err(io_fail(log_path))?;
    let log = EventLog::from_jsonl(&text).map_err(|e| Failure::Input(format!("{}: {e}", log_path.display())))?;
    let snapshot = log
        .events()
        .iter()
        .rev()
        .filter(|e| e.kind == EventKind::GraphSnapshot)
        .find_map(|e| e.detail.as_deref());
    let graph: StructureGraph = match snapshot {
        Some(detail) => serde_json::from_str(detail)
            .map_err(|err| Failure::Input(format!("{}: bad graph snapshot: {err}", log_path.display())))?,
        None => build_endqt_dag(&log)?,
    };
    let mut staged = Staged::default();
    staged.add(out, &graph.export_dot()).map_err(io_fail(out))?;
    staged.commit().map_err(io_fail(out))?;
    Ok(())
}

fn cmd_verify(suite: &str, format: OutputFormat) -> Outcome {
    let names: Vec<&str> = if suite == "all" {
        verify::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut failed = Vec::new();
    let mut json = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let report = verify::run_suite(name).ok_or_else(|| {
            Failure::Input(format!(
                "unknown suite \"{name}\" (expected one of {} or all)",
                verify::SUITES.join(", ")
            ))
        })??;
        if !report.passed() {
            failed.push(*name);
        }
        match format {
            OutputFormat::Csv => {
                let csv = report.to_csv();
                print!(
                    "{}",
                    if i == 0 {
                        &csv[..]
                    } else {
                        csv.split_once('\n').map_or("", |(_, rest)| rest)
                    }
                );
            }
            OutputFormat::Json => json.push(report.to_json()),
        }
    }
    if format == OutputFormat::Json {
        println!("{}", serde_json::Value::Array(json));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Integrity(format!("suite(s) failed: {}", failed.join(", "))))
    }
}

fn engine_named(name: &str) -> Result<TheoryEngine, Failure> {
    Ok(match name {
        "grw" => TheoryEngine::Grw(GrwParams::new(1e-2, 0.25)?),
        "mwi" | "mwi-quasi-local" => TheoryEngine::Mwi(MwiVariant::QuasiLocal),
        "mwi-local" => TheoryEngine::Mwi(MwiVariant::Local),
        "mwi-global" => TheoryEngine::Mwi(MwiVariant::Global),
        "rqm" | "relational" => TheoryEngine::Relational(RelationalVariant::Rqm),
        "single-world" => TheoryEngine::Relational(RelationalVariant::SingleWorld),
        "endqt" => TheoryEngine::EnDqt(EnDqtParams::default()),
        other => return Err(Failure::Input(format!("unknown engine \"{other}\""))),
    })
}

fn cmd_bell(engine: &str, angles: &[f64], trials: usize, seed: u64, format: OutputFormat) -> Outcome {
    let engine = engine_named(engine)?;
    let [a0, a1, b0, b1] = <[f64; 4]>::try_from(angles)
        .map_err(|_| Failure::Input(format!("--angles needs 4 values, got {}", angles.len())))?
        .map(f64::to_radians);
    let params = EprBellParams {
        alice_angles: [a0, a1],
        bob_angles: [b0, b1],
        ..EprBellParams::default()
    };
    let report = run_with(&Scenario::EprBell(params), &engine, trials, seed, Mode::Parallel)?;
    let mut e = [[0.0; 2]; 2];
    for (s, row) in e.iter_mut().enumerate() {
        for (t, v) in row.iter_mut().enumerate() {
            *v = report
                .stats
                .correlator(&[s, t])
                .ok_or_else(|| Failure::Input(format!("no trials landed on settings ({s},{t})")))?;
        }
    }
    let chsh = chsh_from_correlators(e);
    match format {
        OutputFormat::Csv => {
            println!("s,t,E");
            for (s, row) in e.iter().enumerate() {
                for (t, v) in row.iter().enumerate() {
                    println!("{s},{t},{v}");
                }
            }
            println!("CHSH = {chsh}");
            println!("|CHSH| = {}", chsh.abs());
        }
        OutputFormat::Json => println!(
            "{}",
            serde_json::json!({ "engine": report.engine, "trials": trials, "seed": seed, "correlators": e, "chsh": chsh })
        ),
    }
    Ok(())
}
