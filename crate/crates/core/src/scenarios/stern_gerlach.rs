//! Spin sorted into two paths by a magnet, with a detector on one arm.
//!
//! Factors: `spin` (up = index 0), `path` (up arm = index 0) and the
//! detector `D1` (ready = index 0). The magnet flips the path for spin down;
//! the detector flips when the particle is in its arm.

use std::f64::consts::FRAC_PI_2;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate, dstar_report, endqt_measure, grw_measure, ledger_for, mwi_measure, policy_of, series_from, stability_of,
    OutcomeStats, RunReport, TrialRecord, TrialResult,
};
use crate::decomodels::{run_schedule_until, InteractionSchedule, ScheduleEntry};
use crate::differentiation::classify_process;
use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::exec::Mode;
use crate::hilbert::linalg::c;
use crate::hilbert::{Observable, Pauli, SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph, SystemNode};
use crate::theories::{
    argmax, relational_interact, InitiatorKind, LocationMap, Measurement, RelationalTables, TheoryEngine,
};

pub(super) const FACTORS: [&str; 3] = ["spin", "path", "D1"];

const PATH_TAGS: [&str; 2] = ["arm-up", "arm-down"];
const DETECTOR_TAGS: [&str; 2] = ["D1-ready", "D1-fired"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SternGerlachParams {
    pub detector_arm: Arm,
    /// Born weight of spin up in the prepared state.
    pub spin_up_weight: f64,
    /// Constituent count of the detector.
    pub detector_size: usize,
    pub magnet_time: f64,
    pub detector_time: f64,
    /// How long the record is watched after the detector coupling ends.
    pub hold: f64,
    pub dt: f64,
}

impl Default for SternGerlachParams {
    fn default() -> Self {
        Self {
            detector_arm: Arm::Down,
            spin_up_weight: 0.5,
            detector_size: 1000,
            magnet_time: 1.0,
            detector_time: 1.0,
            hold: 1.0,
            dt: 0.05,
        }
    }
}

impl SternGerlachParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(0.0..=1.0).contains(&self.spin_up_weight) {
            errs.push(format!("spin_up_weight must be in [0, 1], got {}", self.spin_up_weight));
        }
        for (name, v) in [
            ("magnet_time", self.magnet_time),
            ("detector_time", self.detector_time),
            ("hold", self.hold),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{name} must be > 0, got {v}"));
            }
        }
        if self.detector_size == 0 {
            errs.push("detector_size must be >= 1".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn detector_end(&self) -> f64 {
        self.magnet_time + self.detector_time
    }

    pub fn schedule(&self) -> Result<InteractionSchedule> {
        let tag = match self.detector_arm {
            Arm::Up => "ux",
            Arm::Down => "dx",
        };
        InteractionSchedule::new(vec![
            ScheduleEntry::new(
                0.0,
                self.magnet_time,
                "spin",
                "path",
                "dx",
                FRAC_PI_2 / self.magnet_time,
            ),
            ScheduleEntry::new(
                self.magnet_time,
                self.detector_end(),
                "path",
                "D1",
                tag,
                FRAC_PI_2 / self.detector_time,
            ),
        ])
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let w = self.spin_up_weight;
        let spin = StateVector::single("spin", &[c(w.sqrt(), 0.0), c((1.0 - w).sqrt(), 0.0)])?;
        let rest = StateVector::basis(SpaceLayout::new([("path", 2), ("D1", 2)])?, 0)?;
        spin.tensor(&rest)
    }
}

fn graph_for(engine: &TheoryEngine, p: &SternGerlachParams) -> Result<StructureGraph> {
    let mut g = StructureGraph::new(policy_of(engine));
    let detector = match engine {
        TheoryEngine::EnDqt(_) => SystemNode::initiator("D1"),
        _ => SystemNode::generator("D1"),
    };
    g.add_node(SystemNode::non_generator("spin"))?;
    g.add_node(SystemNode::generator("path").at(PATH_TAGS))?;
    g.add_node(detector.at(DETECTOR_TAGS))?;
    g.add_interaction("path", "spin", EdgeKind::Udi, true, 0.0)?;
    g.add_interaction("path", "D1", EdgeKind::Udi, false, p.magnet_time)?;
    if matches!(engine, TheoryEngine::Grw(_)) {
        // both parts of the path and of the detector pointer are occupied
        g.add_interaction("path", "path", EdgeKind::PotentialDestruction, false, p.magnet_time)?;
        g.add_interaction("D1", "D1", EdgeKind::PotentialDestruction, false, p.detector_end())?;
    }
    Ok(g)
}

fn locations() -> LocationMap {
    [
        ("path".to_string(), PATH_TAGS.iter().map(|s| s.to_string()).collect()),
        ("D1".to_string(), DETECTOR_TAGS.iter().map(|s| s.to_string()).collect()),
    ]
    .into_iter()
    .collect()
}

pub(super) fn run(
    p: &SternGerlachParams,
    engine: &TheoryEngine,
    trials: usize,
    seed: u64,
    mode: Mode,
) -> Result<RunReport> {
    let stability = stability_of(engine);
    let sched = p.schedule()?;
    let t_end = p.detector_end() + p.hold;
    let traj = run_schedule_until(&p.initial_state()?, &sched, p.dt, t_end)?;

    let spin_z = Observable::pauli("spin", Pauli::Z)?;
    let path_z = Observable::pauli("path", Pauli::Z)?;
    let magnet: Vec<_> = series_from(&traj, "spin", &spin_z, 0.0)?
        .into_iter()
        .filter(|o| o.time <= p.magnet_time + 1e-12)
        .collect();
    let magnet_class = classify_process(&magnet, 1, &stability)?;
    let detector_class = classify_process(
        &series_from(&traj, "path", &path_z, p.magnet_time)?,
        p.detector_size,
        &stability,
    )?;

    let reports = vec![
        dstar_report(&traj, "spin", "spin-z", "source", &stability)?,
        dstar_report(&traj, "path", "which-path", "interferometer", &stability)?,
        dstar_report(&traj, "D1", "pointer", "detector", &stability)?,
    ];
    let prelude = vec![
        Event::new(EventKind::Interaction, 0.0, ["spin", "path"]).with_detail("magnet"),
        Event::new(EventKind::Interaction, p.magnet_time, ["path", "D1"]).with_detail("detector"),
    ];

    let ledger = match engine {
        TheoryEngine::EnDqt(params) => {
            let mut l = ledger_for(params, &[])?;
            if l.initiator_kind("D1").is_none() {
                l.add_initiator("D1", InitiatorKind::A);
            }
            Some(l)
        }
        _ => None,
    };
    let base_graph = graph_for(engine, p)?;
    let locations = locations();
    let state = traj.last().clone();
    let spin_m = Measurement::new("spin-z", spin_z)?;
    let path_m = Measurement::new("which-path", path_z)?;
    let det_end = p.detector_end();

    let trial = |rng: &mut ChaCha8Rng, keep: bool| -> Result<TrialResult> {
        let mut graph = base_graph.clone();
        let mut events = Vec::new();
        let outcome = match engine {
            TheoryEngine::Grw(params) => {
                let (_, post, _) = grw_measure(
                    &state,
                    params,
                    "D1",
                    p.detector_size,
                    &path_m,
                    &mut graph,
                    &locations,
                    det_end,
                    &mut events,
                    rng,
                )?;
                Some(post)
            }
            TheoryEngine::Mwi(variant) => {
                let (_, st) = mwi_measure(
                    &state,
                    *variant,
                    "path",
                    &spin_m,
                    &magnet_class,
                    &mut graph,
                    p.magnet_time,
                    &mut events,
                    rng,
                )?;
                let (hit, st) = mwi_measure(
                    &st,
                    *variant,
                    "D1",
                    &path_m,
                    &detector_class,
                    &mut graph,
                    t_end,
                    &mut events,
                    rng,
                )?;
                hit.map(|_| st)
            }
            TheoryEngine::Relational(variant) => {
                let mut tables = RelationalTables::default();
                let fact = relational_interact(&mut tables, &state, "D1", &path_m, &graph, *variant, t_end, rng)?;
                match fact {
                    Some(f) => {
                        events.push(f.to_event());
                        Some(tables.relative_state(&state, "D1")?)
                    }
                    None => {
                        events.push(
                            Event::new(EventKind::NoEvent, t_end, ["D1", "path"])
                                .with_detail("observer yields no fact"),
                        );
                        None
                    }
                }
            }
            TheoryEngine::EnDqt(_) => {
                let ledger = ledger.as_ref().expect("EnDQT runs carry a ledger");
                let (hit, st) = endqt_measure(
                    &state,
                    ledger,
                    "D1",
                    "path",
                    &path_m,
                    &detector_class,
                    &mut graph,
                    t_end,
                    &mut events,
                    rng,
                )?;
                hit.map(|_| st)
            }
        };
        let spin = match outcome {
            Some(st) => Some(argmax(&spin_m.probabilities(&st)?)),
            None => None,
        };
        Ok(TrialResult {
            settings: Vec::new(),
            outcomes: vec![spin],
            record: keep.then_some(TrialRecord { events, graph }),
        })
    };
    aggregate(
        "stern_gerlach",
        engine,
        trials,
        seed,
        mode,
        OutcomeStats::new(&[], &["spin"]),
        prelude,
        reports,
        ledger.clone(),
        trial,
    )
}

/// Magnet-only evidence, exposed for tests.
#[cfg(test)]
fn magnet_evidence(p: &SternGerlachParams) -> Result<crate::differentiation::ProcessClass> {
    let traj = run_schedule_until(&p.initial_state()?, &p.schedule()?, p.dt, p.magnet_time)?;
    let series = series_from(&traj, "spin", &Observable::pauli("spin", Pauli::Z)?, 0.0)?;
    classify_process(&series, 1, &Default::default())
}
