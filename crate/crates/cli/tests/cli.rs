use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_determinacy"));
    c.env_remove("DETERMINACY_OUT_DIR");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn run_writes_every_output() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(config("epr_bell.toml"))
        .args(["--seed", "42", "--trials", "400", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let got = files(out.path());
    for ext in ["events.jsonl", "stats.csv", "graph.dot", "dstar.csv"] {
        assert!(got.contains(&format!("epr_bell.{ext}")), "{got:?}");
    }
    let stats = fs::read_to_string(out.path().join("epr_bell.stats.csv")).unwrap();
    assert!(stats.starts_with("s,t,x,y,count,p"));
    assert!(fs::read_to_string(out.path().join("epr_bell.graph.dot"))
        .unwrap()
        .starts_with("digraph"));
}

#[test]
fn missing_config_names_the_path() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config", "no/such/missing.cfg", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no/such/missing.cfg"), "{}", stderr(&o));
    assert!(files(out.path()).is_empty());
}

#[test]
fn invalid_config_lists_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[scenario]\nname = \"epr_bell\"\ntrials = 0\nbogus = 1\n[engine]\ntheory = \"grw\"\n[engine.grw]\nlambda = -1.0\n").unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    for needle in ["bad.toml", "scenario.trials", "scenario.bogus", "engine.grw.lambda"] {
        assert!(e.contains(needle), "{needle} missing from: {e}");
    }
    assert_eq!(files(dir.path()), vec!["bad.toml".to_string()]);
}

#[test]
fn bell_endqt_reaches_tsirelson() {
    let o = bin()
        .args([
            "bell",
            "--engine",
            "endqt",
            "--angles",
            "0,90,45,135",
            "--trials",
            "100000",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let line = text.lines().find(|l| l.starts_with("|CHSH| = ")).expect("CHSH line");
    let s: f64 = line["|CHSH| = ".len()..].parse().unwrap();
    // each correlator has standard error below 1/sqrt(25000)
    let tol = 4.0 * 4.0 / 25_000f64.sqrt();
    assert!((s - 2.0 * 2f64.sqrt()).abs() < tol, "{s}");
}

#[test]
fn bell_rejects_wrong_angle_count() {
    let o = bin()
        .args(["bell", "--engine", "grw", "--angles", "0,90,45"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["bell", "--engine", "bohm"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn blocked_output_leaves_nothing_behind() {
    let out = tempfile::tempdir().unwrap();
    // a directory where the graph file should go makes the last renames fail
    fs::create_dir(out.path().join("sdc_chain.graph.dot")).unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(config("sdc_chain.toml"))
        .args(["--trials", "5", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(files(out.path()), vec!["sdc_chain.graph.dot".to_string()]);
}

#[test]
fn sweep_validates_every_point_first() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["sweep", "--config"])
        .arg(config("stern_gerlach.toml"))
        .args(["--param", "scenario.trials", "--grid", "50,-5", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(files(out.path()).is_empty());

    let o = bin()
        .args(["sweep", "--config"])
        .arg(config("stern_gerlach.toml"))
        .args([
            "--param",
            "scenario.trials",
            "--grid",
            "50,60",
            "--format",
            "json",
            "--out",
        ])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("stern_gerlach.sweep.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn seed_fixes_every_byte() {
    let run = |seed: &str| {
        let out = tempfile::tempdir().unwrap();
        let o = bin()
            .args(["run", "--config"])
            .arg(config("stern_gerlach.toml"))
            .args(["--trials", "300", "--seed", seed, "--out"])
            .arg(out.path())
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        files(out.path())
            .into_iter()
            .map(|f| fs::read(out.path().join(f)).unwrap())
            .collect::<Vec<_>>()
    };
    let (a, b, c) = (run("5"), run("5"), run("6"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sequential_matches_parallel() {
    let run = |extra: &[&str]| {
        let out = tempfile::tempdir().unwrap();
        let o = bin()
            .args(["run", "--config"])
            .arg(config("epr_bell.toml"))
            .args(["--trials", "300", "--out"])
            .arg(out.path())
            .args(extra)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.path().join("epr_bell.events.jsonl")).unwrap()
    };
    assert_eq!(run(&[]), run(&["--sequential"]));
}

#[test]
fn env_var_sets_default_output_dir() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .env("DETERMINACY_OUT_DIR", out.path())
        .args(["run", "--config"])
        .arg(config("weak_sweep.toml"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.path().join("weak_sweep.stats.csv").exists());
}

#[test]
fn export_graph_round_trips_the_run_graph() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--config"])
        .arg(config("sdc_chain.toml"))
        .args(["--trials", "5", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let dot = out.path().join("exported.dot");
    let o = bin()
        .args(["export-graph", "--log"])
        .arg(out.path().join("sdc_chain.events.jsonl"))
        .arg("--out")
        .arg(&dot)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(&dot).unwrap(),
        fs::read(out.path().join("sdc_chain.graph.dot")).unwrap()
    );
}

#[test]
fn verify_suites_and_exit_codes() {
    let o = bin().args(["verify", "weak"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .skip(1)
        .all(|l| l.contains(",true,")));
    let o = bin().args(["verify", "nonsense"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
