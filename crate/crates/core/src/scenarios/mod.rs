//! Canonical scenarios runnable under any theory engine, and the
//! configuration loader.
//!
//! A run repeats a scenario for a number of seeded trials. Outcome counts
//! are aggregated over all trials; the event log, final graph and
//! differentiation reports come from trial 0.

mod config;
mod epr_bell;
mod sdc_chain;
mod stern_gerlach;
mod weak;

pub use config::{from_table, load_config, parse_table, set_path, Config, OutputFormat, OutputSettings};
pub use epr_bell::EprBellParams;
pub use sdc_chain::SdcChainParams;
pub use stern_gerlach::{Arm, SternGerlachParams};
pub use weak::{weak_sweep, WeakRow, WeakSweepParams, WeakTable};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomodels::Trajectory;
use crate::differentiation::{
    classify_process, degree_of_differentiation, environment_overlaps, DifferentiationReport, ProcessClass,
    StabilityParams,
};
use crate::error::{Error, Result};
use crate::events::{Event, EventKind, EventLog};
use crate::exec::{run_trials, Mode};
use crate::hilbert::{Observable, StateVector};
use crate::structures::{EdgeKind, StructureGraph};
use crate::theories::{
    born_sample, endqt_determinate_event, grw_collapse_propagate, grw_step, mwi_branch, DcLedger, GrwParams,
    LocationMap, Measurement, MwiVariant, TheoryEngine,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    SternGerlachInterferometer(SternGerlachParams),
    EprBell(EprBellParams),
    SdcChain(SdcChainParams),
    WeakMeasurementSweep(WeakSweepParams),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SternGerlachInterferometer(_) => "stern_gerlach",
            Scenario::EprBell(_) => "epr_bell",
            Scenario::SdcChain(_) => "sdc_chain",
            Scenario::WeakMeasurementSweep(_) => "weak_sweep",
        }
    }

    /// Factor labels of the simulated state.
    pub fn systems(&self) -> Vec<String> {
        let labels: &[&str] = match self {
            Scenario::SternGerlachInterferometer(_) => &stern_gerlach::FACTORS,
            Scenario::EprBell(_) => &epr_bell::FACTORS,
            Scenario::SdcChain(_) => &sdc_chain::FACTORS,
            Scenario::WeakMeasurementSweep(_) => &weak::FACTORS,
        };
        labels.iter().map(|s| s.to_string()).collect()
    }

    /// Rejects engine/scenario pairs that have no meaning.
    pub fn check_engine(&self, engine: &TheoryEngine) -> Result<()> {
        if matches!(self, Scenario::SdcChain(_)) && !matches!(engine, TheoryEngine::EnDqt(_)) {
            return Err(Error::Config(vec![format!(
                "engine.theory must be \"endqt\" for sdc_chain, got \"{}\"",
                engine.name()
            )]));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::SternGerlachInterferometer(p) => p.validate(),
            Scenario::EprBell(p) => p.validate(),
            Scenario::SdcChain(p) => p.validate(),
            Scenario::WeakMeasurementSweep(p) => p.validate(),
        }
    }
}

/// Outcome counts keyed by setting indices and outcome indices; `None` marks
/// a measurement that produced no value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStats {
    pub settings: Vec<String>,
    pub outcomes: Vec<String>,
    counts: BTreeMap<(Vec<usize>, Vec<Option<usize>>), u64>,
}

impl OutcomeStats {
    pub fn new(settings: &[&str], outcomes: &[&str]) -> Self {
        Self {
            settings: settings.iter().map(|s| s.to_string()).collect(),
            outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
            counts: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, settings: Vec<usize>, outcomes: Vec<Option<usize>>) {
        *self.counts.entry((settings, outcomes)).or_default() += 1;
    }

    pub fn count(&self, settings: &[usize], outcomes: &[Option<usize>]) -> u64 {
        self.counts
            .get(&(settings.to_vec(), outcomes.to_vec()))
            .copied()
            .unwrap_or(0)
    }

    /// Trials run with `settings`.
    pub fn total(&self, settings: &[usize]) -> u64 {
        self.counts
            .iter()
            .filter(|((s, _), _)| s == settings)
            .map(|(_, n)| n)
            .sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], &[Option<usize>], u64)> {
        self.counts.iter().map(|((s, o), n)| (s.as_slice(), o.as_slice(), *n))
    }

    /// Counts of each value of outcome column `k` under `settings`.
    pub fn marginal(&self, settings: &[usize], k: usize) -> BTreeMap<Option<usize>, u64> {
        let mut out = BTreeMap::new();
        for ((s, o), n) in &self.counts {
            if s == settings {
                *out.entry(o[k]).or_default() += n;
            }
        }
        out
    }

    /// `Σ sign(x) sign(y) n / N` for the first two outcome columns, with
    /// outcome 0 read as `+1`; trials without both values are skipped.
    pub fn correlator(&self, settings: &[usize]) -> Option<f64> {
        let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
        let (mut sum, mut n) = (0.0, 0u64);
        for ((s, o), c) in &self.counts {
            if s == settings {
                if let (Some(Some(x)), Some(Some(y))) = (o.first(), o.get(1)) {
                    sum += sign(*x) * sign(*y) * *c as f64;
                    n += c;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Columns: settings, outcomes (`-` for no value), count, relative
    /// frequency within the setting.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for h in self.settings.iter().chain(&self.outcomes) {
            out.push_str(h);
            out.push(',');
        }
        out.push_str("count,p\n");
        for ((s, o), n) in &self.counts {
            for v in s {
                let _ = write!(out, "{v},");
            }
            for v in o {
                match v {
                    Some(v) => {
                        let _ = write!(out, "{v},");
                    }
                    None => out.push_str("-,"),
                }
            }
            let _ = writeln!(out, "{n},{}", *n as f64 / self.total(s) as f64);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .counts
            .iter()
            .map(|((s, o), n)| {
                serde_json::json!({
                    "settings": s,
                    "outcomes": o,
                    "count": n,
                    "p": *n as f64 / self.total(s) as f64,
                })
            })
            .collect();
        serde_json::json!({ "settings": self.settings, "outcomes": self.outcomes, "rows": rows }).to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub engine: String,
    pub seed: u64,
    pub trials: usize,
    pub log: EventLog,
    pub stats: OutcomeStats,
    pub graph: StructureGraph,
    pub reports: Vec<DifferentiationReport>,
    pub ledger: Option<DcLedger>,
    pub sweep: Option<WeakTable>,
}

impl RunReport {
    /// Every report in one table: `system,property,region,t,d_star`.
    pub fn reports_csv(&self) -> String {
        let mut out = String::from("system,property,region,t,d_star\n");
        for r in &self.reports {
            for (t, d) in r.samples() {
                let _ = writeln!(out, "{},{},{},{t},{d}", r.system, r.property, r.region);
            }
        }
        out
    }

    /// Statistics table (or the sweep table for the weak-measurement sweep).
    pub fn table(&self, format: OutputFormat) -> String {
        match (&self.sweep, format) {
            (Some(s), OutputFormat::Csv) => s.to_csv(),
            (Some(s), OutputFormat::Json) => serde_json::to_string(s).expect("sweep serializes"),
            (None, OutputFormat::Csv) => self.stats.to_csv(),
            (None, OutputFormat::Json) => self.stats.to_json(),
        }
    }
}

/// What one trial hands back to the aggregator.
struct TrialResult {
    settings: Vec<usize>,
    outcomes: Vec<Option<usize>>,
    record: Option<TrialRecord>,
}

/// Full record of the representative trial.
struct TrialRecord {
    events: Vec<Event>,
    graph: StructureGraph,
}

pub fn run(scenario: &Scenario, engine: &TheoryEngine, trials: usize, seed: u64) -> Result<RunReport> {
    run_with(scenario, engine, trials, seed, Mode::Parallel)
}

/// Deterministic in `seed` whatever the mode.
pub fn run_with(scenario: &Scenario, engine: &TheoryEngine, trials: usize, seed: u64, mode: Mode) -> Result<RunReport> {
    if trials == 0 {
        return Err(Error::Config(vec!["trials must be >= 1".into()]));
    }
    scenario.validate()?;
    scenario.check_engine(engine)?;
    match scenario {
        Scenario::SternGerlachInterferometer(p) => stern_gerlach::run(p, engine, trials, seed, mode),
        Scenario::EprBell(p) => epr_bell::run(p, engine, trials, seed, mode),
        Scenario::SdcChain(p) => sdc_chain::run(p, engine, trials, seed, mode),
        Scenario::WeakMeasurementSweep(p) => weak::run(p, engine, seed),
    }
}

/// Runs `trial` for every index, keeping the full record of trial 0.
#[allow(clippy::too_many_arguments)]
fn aggregate<F>(
    scenario: &str,
    engine: &TheoryEngine,
    trials: usize,
    seed: u64,
    mode: Mode,
    mut stats: OutcomeStats,
    mut prelude: Vec<Event>,
    reports: Vec<DifferentiationReport>,
    ledger: Option<DcLedger>,
    trial: F,
) -> Result<RunReport>
where
    F: Fn(&mut ChaCha8Rng, bool) -> Result<TrialResult> + Sync + Send,
{
    let results = run_trials(mode, seed, trials, |i, rng| trial(rng, i == 0))?;
    let mut record = None;
    for r in results {
        stats.add(r.settings, r.outcomes);
        if r.record.is_some() {
            record = r.record;
        }
    }
    let record = record.ok_or_else(|| Error::integrity("representative trial kept no record"))?;
    prelude.extend(record.events);
    // stable, so setup events stay ahead of trial events at equal times
    prelude.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut log = EventLog::new();
    log.extend(prelude);
    let end = last_time(&log);
    log.push(Event::new(EventKind::GraphSnapshot, end, Vec::<String>::new()).with_detail(record.graph.to_json()));
    Ok(RunReport {
        scenario: scenario.to_string(),
        engine: engine.name().to_string(),
        seed,
        trials,
        log,
        stats,
        graph: record.graph,
        reports,
        ledger,
        sweep: None,
    })
}

fn last_time(log: &EventLog) -> f64 {
    log.events().iter().map(|e| e.time).fold(0.0, f64::max)
}

/// D* of `factor` at every trajectory sample.
fn dstar_report(
    traj: &Trajectory,
    factor: &str,
    property: &str,
    region: &str,
    stability: &StabilityParams,
) -> Result<DifferentiationReport> {
    let mut r = DifferentiationReport::new(property, factor, region);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        r.push(*t, degree_of_differentiation(&s.reduced(&[factor])?)?)?;
    }
    r.finalize(stability.eps, stability.window);
    Ok(r)
}

/// Evidence for a record made at `t` that the state then holds for `hold`
/// (no further dynamics on these factors).
fn static_evidence(
    state: &StateVector,
    pointer: &Observable,
    env_size: usize,
    t: f64,
    hold: f64,
    stability: &StabilityParams,
) -> Result<ProcessClass> {
    let system = pointer
        .single_factor()
        .ok_or_else(|| Error::invalid("pointer must act on one factor"))?;
    let series = [
        environment_overlaps(state, system, pointer, t)?,
        environment_overlaps(state, system, pointer, t + hold)?,
    ];
    classify_process(&series, env_size, stability)
}

/// Waits for the first spontaneous hit on `apparatus`, whose collapse rate
/// is scaled by its constituent count, then propagates determinacy.
/// Returns the measured outcome, post-collapse state and collapse time.
#[allow(clippy::too_many_arguments)]
fn grw_measure<R: Rng + ?Sized>(
    state: &StateVector,
    params: &GrwParams,
    apparatus: &str,
    size: usize,
    m: &Measurement,
    graph: &mut StructureGraph,
    locations: &LocationMap,
    t: f64,
    events: &mut Vec<Event>,
    rng: &mut R,
) -> Result<(usize, StateVector, f64)> {
    let rate = GrwParams::new(params.lambda * size as f64, params.sigma)?;
    if rate.lambda <= 0.0 {
        return Err(Error::invalid("GRW measurement needs a positive collapse rate"));
    }
    let dt = 1.0 / rate.lambda;
    let mut now = t;
    for _ in 0..100_000 {
        let (next, hits) = grw_step(state, &[apparatus], &rate, now, dt, None, rng)?;
        now += dt;
        let Some(hit) = hits.first() else { continue };
        let prop = grw_collapse_propagate(state, &next, hit, graph, locations)?;
        events.push(hit.to_event());
        events.extend(prop.events(apparatus, hit.time));
        if graph.contains(&m.system)
            && !graph.has_potential_destruction(&m.system)
            && !graph.has_edge(apparatus, &m.system, EdgeKind::Sdi)
        {
            graph.add_interaction(apparatus, &m.system, EdgeKind::Sdi, true, hit.time)?;
        }
        let outcome = crate::theories::argmax(&m.probabilities(&next)?);
        return Ok((outcome, next, hit.time));
    }
    Err(Error::integrity("no collapse after 100000 mean lifetimes"))
}

/// Branches and self-locates in one world by weight. `None` when the
/// process was reversible and nothing branched.
#[allow(clippy::too_many_arguments)]
fn mwi_measure<R: Rng + ?Sized>(
    state: &StateVector,
    variant: MwiVariant,
    apparatus: &str,
    m: &Measurement,
    evidence: &ProcessClass,
    graph: &mut StructureGraph,
    t: f64,
    events: &mut Vec<Event>,
    rng: &mut R,
) -> Result<(Option<usize>, StateVector)> {
    let worlds = mwi_branch(state, apparatus, m, variant, graph, evidence, t)?;
    events.push(worlds.to_event(&[apparatus, &m.system], t));
    let weights: Vec<f64> = worlds.worlds().iter().map(|w| w.weight).collect();
    let k = born_sample(&weights, rng)?;
    let world = &worlds.worlds()[k];
    *graph = world.graph.clone();
    Ok((worlds.branched().then_some(world.outcome), world.state.clone()))
}

/// A determinate-value event of `target` relative to `holder`; `None` when
/// the conditions for one are not met.
#[allow(clippy::too_many_arguments)]
fn endqt_measure<R: Rng + ?Sized>(
    state: &StateVector,
    ledger: &DcLedger,
    holder: &str,
    target: &str,
    m: &Measurement,
    evidence: &ProcessClass,
    graph: &mut StructureGraph,
    t: f64,
    events: &mut Vec<Event>,
    rng: &mut R,
) -> Result<(Option<usize>, StateVector)> {
    let out = endqt_determinate_event(state, ledger, holder, target, m, evidence, graph, t, rng)?;
    events.push(out.to_event(holder, target, t));
    let index = out.assignments.iter().find(|a| a.system == target).map(|a| a.index);
    Ok((index, out.state))
}

fn stability_of(engine: &TheoryEngine) -> StabilityParams {
    match engine {
        TheoryEngine::EnDqt(p) => p.stability,
        _ => StabilityParams::default(),
    }
}

/// Graph policy each engine applies to unstable edges.
fn policy_of(engine: &TheoryEngine) -> crate::structures::UdiPolicy {
    use crate::structures::UdiPolicy;
    match engine {
        TheoryEngine::Mwi(v) => v.policy(),
        TheoryEngine::EnDqt(_) => UdiPolicy::Detach,
        _ => UdiPolicy::Propagate,
    }
}

/// Overlap series of `factor` restricted to samples at or after `from`.
fn series_from(
    traj: &Trajectory,
    factor: &str,
    pointer: &Observable,
    from: f64,
) -> Result<Vec<crate::differentiation::OverlapMatrix>> {
    Ok(traj
        .overlap_series(factor, pointer)?
        .into_iter()
        .filter(|o| o.time >= from - 1e-12)
        .collect())
}

/// Ledger from the engine's parameters plus the scenario's own composites.
fn ledger_for(params: &crate::theories::EnDqtParams, composites: &[(&str, &[&str])]) -> Result<DcLedger> {
    let mut ledger = DcLedger::from_params(params)?;
    for (label, parts) in composites {
        if ledger.parts(label).is_none() {
            ledger.add_composite(label, parts.iter().copied())?;
        }
    }
    Ok(ledger)
}
