//! Determination chain `S0 → S1 → S2`.
//!
//! `S1` is a composite of two qubits: `S1a` is decohered by the initiator
//! `S0`, while `S1b` decoheres `S2`. Schedule entries name their parties as
//! `(decohered, environment)`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate, dstar_report, endqt_measure, ledger_for, series_from, OutcomeStats, RunReport, TrialRecord, TrialResult,
};
use crate::decomodels::{evolve_between, run_schedule_until, InteractionSchedule, ScheduleEntry};
use crate::differentiation::{classify_process, ProcessClass};
use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::exec::Mode;
use crate::hilbert::linalg::c;
use crate::hilbert::{SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph, SystemNode, UdiPolicy};
use crate::theories::{endqt_grant_dc, DcLedger, InitiatorKind, Measurement, TheoryEngine};

pub(super) const FACTORS: [&str; 4] = ["S0", "S1a", "S1b", "S2"];

const COMPOSITE: (&str, &[&str]) = ("S1", &["S1a", "S1b"]);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdcChainParams {
    /// Real amplitudes of `S1a` in the computational basis.
    pub s1_amplitudes: [f64; 2],
    pub s2_amplitudes: [f64; 2],
    pub schedule: Vec<ScheduleEntry>,
    /// Constituent count of each system acting as an environment.
    pub sizes: BTreeMap<String, usize>,
    pub hold: f64,
    pub dt: f64,
}

impl Default for SdcChainParams {
    fn default() -> Self {
        Self::canonical(1.0, 0.5, 1.5)
    }
}

impl SdcChainParams {
    /// `S0` decoheres `S1a` on `[0, t1]` and `S1b` decoheres `S2` on
    /// `[s2_start, t2]`, each ending with orthogonal environment states.
    pub fn canonical(t1: f64, s2_start: f64, t2: f64) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            s1_amplitudes: [h, h],
            s2_amplitudes: [h, h],
            schedule: vec![
                ScheduleEntry::new(0.0, t1, "S1a", "S0", "zx", FRAC_PI_4 / t1),
                ScheduleEntry::new(s2_start, t2, "S2", "S1b", "zx", FRAC_PI_4 / (t2 - s2_start)),
            ],
            sizes: [("S0".to_string(), 16), ("S1".to_string(), 16)].into_iter().collect(),
            hold: 0.5,
            dt: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.schedule.is_empty() {
            errs.push("schedule must have at least one entry".to_string());
        }
        for (i, e) in self.schedule.iter().enumerate() {
            for party in [&e.parties.0, &e.parties.1] {
                if !FACTORS.contains(&party.as_str()) {
                    errs.push(format!("schedule[{i}] references undeclared system '{party}'"));
                }
            }
            if !(e.start >= 0.0 && e.end > e.start && e.end.is_finite()) {
                errs.push(format!(
                    "schedule[{i}] needs 0 <= start < end, got [{}, {}]",
                    e.start, e.end
                ));
            }
            if !e.strength.is_finite() {
                errs.push(format!("schedule[{i}].strength must be finite"));
            }
            let env = system_of(&e.parties.1);
            if !self.sizes.contains_key(env) {
                errs.push(format!("sizes.{env} is required by schedule[{i}]"));
            }
        }
        for (name, a) in [
            ("s1_amplitudes", self.s1_amplitudes),
            ("s2_amplitudes", self.s2_amplitudes),
        ] {
            if a.iter().any(|x| !x.is_finite()) || a[0] * a[0] + a[1] * a[1] <= 0.0 {
                errs.push(format!("{name} must be finite and not both zero"));
            }
        }
        for (name, v) in [("hold", self.hold), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be > 0, got {v}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let qubit = |label: &str, a: [f64; 2]| {
            let n = (a[0] * a[0] + a[1] * a[1]).sqrt();
            StateVector::single(label, &[c(a[0] / n, 0.0), c(a[1] / n, 0.0)])
        };
        let ready = |label: &str| StateVector::basis(SpaceLayout::single(label, 2)?, 0);
        ready("S0")?
            .tensor(&qubit("S1a", self.s1_amplitudes)?)?
            .tensor(&ready("S1b")?)?
            .tensor(&qubit("S2", self.s2_amplitudes)?)
    }

    pub fn interaction_schedule(&self) -> Result<InteractionSchedule> {
        InteractionSchedule::new(self.schedule.clone())
    }
}

fn system_of(factor: &str) -> &str {
    if COMPOSITE.1.contains(&factor) {
        COMPOSITE.0
    } else {
        factor
    }
}

/// Quasi-irreversibility of each entry, judged from the decohered party's
/// overlaps from the entry's start until `hold` after the whole schedule.
fn entry_evidence(
    p: &SdcChainParams,
    traj: &crate::decomodels::Trajectory,
    stability: &crate::differentiation::StabilityParams,
) -> Result<BTreeMap<usize, ProcessClass>> {
    let mut out = BTreeMap::new();
    for (i, e) in p.schedule.iter().enumerate() {
        let pointer = e.pointer_for(&e.parties.0)?;
        let series = series_from(traj, &e.parties.0, &pointer, e.start)?;
        let size = p.sizes.get(system_of(&e.parties.1)).copied().unwrap_or(1);
        out.insert(i, classify_process(&series, size, stability)?);
    }
    Ok(out)
}

fn graph_for(ledger: &DcLedger) -> Result<StructureGraph> {
    let mut g = StructureGraph::new(UdiPolicy::Detach);
    let mut seen = Vec::new();
    for f in FACTORS {
        let s = system_of(f);
        if seen.contains(&s) {
            continue;
        }
        seen.push(s);
        g.add_node(match ledger.initiator_kind(s) {
            Some(_) => SystemNode::initiator(s),
            None => SystemNode::non_generator(s),
        })?;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy)]
enum Action {
    End(usize),
    Start(usize),
}

pub(super) fn run(
    p: &SdcChainParams,
    engine: &TheoryEngine,
    trials: usize,
    seed: u64,
    mode: Mode,
) -> Result<RunReport> {
    let TheoryEngine::EnDqt(params) = engine else {
        return Err(Error::Config(vec!["sdc_chain runs only under the endqt engine".into()]));
    };
    let stability = params.stability;
    let sched = p.interaction_schedule()?;
    let initial = p.initial_state()?;
    let traj = run_schedule_until(&initial, &sched, p.dt, sched.end_time() + p.hold)?;
    let evidence = entry_evidence(p, &traj, &stability)?;

    let mut ledger = ledger_for(params, &[COMPOSITE])?;
    if ledger.initiator_kind("S0").is_none() {
        ledger.add_initiator("S0", InitiatorKind::A);
    }
    let grants = endqt_grant_dc(&sched, &evidence, &mut ledger, params.commute_tol)?;
    let prelude: Vec<Event> = grants.iter().map(|g| g.to_event()).collect();
    let reports = vec![
        dstar_report(&traj, "S1a", "z", "chain", &stability)?,
        dstar_report(&traj, "S2", "z", "chain", &stability)?,
    ];

    let mut actions: Vec<(f64, Action)> = Vec::new();
    for (i, e) in p.schedule.iter().enumerate() {
        actions.push((e.start, Action::Start(i)));
        actions.push((e.end, Action::End(i)));
    }
    // ends before starts at equal times, then schedule order
    actions.sort_by(|a, b| {
        let rank = |x: &Action| match x {
            Action::End(i) => (0, *i),
            Action::Start(i) => (1, *i),
        };
        a.0.total_cmp(&b.0).then(rank(&a.1).cmp(&rank(&b.1)))
    });
    let base_graph = graph_for(&ledger)?;
    let measurements: Vec<Measurement> = p
        .schedule
        .iter()
        .map(|e| Measurement::new("z", e.pointer_for(&e.parties.0)?))
        .collect::<Result<_>>()?;

    let trial = |rng: &mut ChaCha8Rng, keep: bool| -> Result<TrialResult> {
        let mut graph = base_graph.clone();
        let mut events = Vec::new();
        let mut state = initial.clone();
        let mut now = 0.0;
        let mut values: BTreeMap<String, usize> = BTreeMap::new();
        for &(t, action) in &actions {
            match action {
                Action::Start(i) => {
                    let e = &p.schedule[i];
                    let (target, env) = (system_of(&e.parties.0), system_of(&e.parties.1));
                    events.push(Event::new(EventKind::Interaction, t, [env, target]).with_detail(e.tag.clone()));
                    if !graph.is_ds_node(env) && !graph.is_ds_node(target) {
                        graph.add_interaction(env, target, EdgeKind::Udi, true, t)?;
                    }
                }
                Action::End(i) => {
                    let e = &p.schedule[i];
                    let (target, env) = (system_of(&e.parties.0), system_of(&e.parties.1));
                    state = evolve_between(&state, &sched, now, t)?;
                    now = t;
                    let (hit, post) = endqt_measure(
                        &state,
                        &ledger,
                        env,
                        target,
                        &measurements[i],
                        &evidence[&i],
                        &mut graph,
                        t,
                        &mut events,
                        rng,
                    )?;
                    state = post;
                    if let Some(v) = hit {
                        values.insert(target.to_string(), v);
                    }
                }
            }
        }
        Ok(TrialResult {
            settings: Vec::new(),
            outcomes: vec![values.get("S1").copied(), values.get("S2").copied()],
            record: keep.then_some(TrialRecord { events, graph }),
        })
    };
    aggregate(
        "sdc_chain",
        engine,
        trials,
        seed,
        mode,
        OutcomeStats::new(&[], &["S1", "S2"]),
        prelude,
        reports,
        Some(ledger.clone()),
        trial,
    )
}
