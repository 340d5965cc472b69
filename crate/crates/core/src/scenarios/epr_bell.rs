//! Entangled pair measured in two wings at randomly chosen spin angles.
//!
//! Factors: halves `A`, `B` and the two laboratory pointers `L_A`, `L_B`.
//! Each wing couples its pointer to its half along the chosen angle and then
//! the engine decides what becomes determinate.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate, endqt_measure, grw_measure, ledger_for, mwi_measure, policy_of, stability_of, static_evidence,
    OutcomeStats, RunReport, TrialRecord, TrialResult,
};
use crate::causal::{singlet_state, EMISSION, WING_A, WING_B};
use crate::decomodels::couple_pointer_into;
use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::exec::Mode;
use crate::hilbert::{Observable, SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph, SystemNode};
use crate::theories::{relational_interact, InitiatorKind, LocationMap, Measurement, RelationalTables, TheoryEngine};

pub(super) const FACTORS: [&str; 4] = ["A", "B", "L_A", "L_B"];

const SOURCE: &str = "Lambda";
const REFEREE: &str = "Referee";
const LAB_A: &str = "L_A";
const LAB_B: &str = "L_B";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EprBellParams {
    /// Measurement angles in radians.
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
    /// Relative phase of `|01⟩ + phase |10⟩`; −1 is the singlet.
    pub phase: f64,
    /// Constituent count of each laboratory pointer.
    pub apparatus_size: usize,
    pub hold: f64,
}

impl Default for EprBellParams {
    fn default() -> Self {
        Self {
            alice_angles: [0.0, FRAC_PI_2],
            bob_angles: [FRAC_PI_4, 3.0 * FRAC_PI_4],
            phase: -1.0,
            apparatus_size: 1000,
            hold: 1.0,
        }
    }
}

impl EprBellParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.alice_angles.iter().chain(&self.bob_angles).any(|a| !a.is_finite()) {
            errs.push("angles must be finite".to_string());
        }
        if !self.phase.is_finite() {
            errs.push(format!("phase must be finite, got {}", self.phase));
        }
        if self.apparatus_size == 0 {
            errs.push("apparatus_size must be >= 1".into());
        }
        if !(self.hold > 0.0 && self.hold.is_finite()) {
            errs.push(format!("hold must be > 0, got {}", self.hold));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let pointers = StateVector::basis(SpaceLayout::new([(LAB_A, 2), (LAB_B, 2)])?, 0)?;
        singlet_state(self.phase)?.tensor(&pointers)
    }
}

fn graph_for(engine: &TheoryEngine) -> Result<StructureGraph> {
    let mut g = StructureGraph::new(policy_of(engine));
    g.add_node(SystemNode::non_generator(WING_A))?;
    g.add_node(SystemNode::non_generator(WING_B))?;
    match engine {
        TheoryEngine::EnDqt(_) => {
            g.add_node(SystemNode::non_generator(SOURCE))?;
            g.add_node(SystemNode::initiator(LAB_A))?;
            g.add_node(SystemNode::initiator(LAB_B))?;
            g.add_interaction(SOURCE, WING_A, EdgeKind::Udi, true, 0.0)?;
            g.add_interaction(SOURCE, WING_B, EdgeKind::Udi, true, 0.0)?;
        }
        _ => {
            g.add_node(SystemNode::generator(LAB_A))?;
            g.add_node(SystemNode::generator(LAB_B))?;
            if matches!(engine, TheoryEngine::Relational(_)) {
                g.add_node(SystemNode::generator(REFEREE))?;
            }
            g.add_interaction(WING_A, WING_B, EdgeKind::Udi, false, 0.0)?;
        }
    }
    Ok(g)
}

pub(super) fn run(p: &EprBellParams, engine: &TheoryEngine, trials: usize, seed: u64, mode: Mode) -> Result<RunReport> {
    let stability = stability_of(engine);
    let initial = p.initial_state()?;
    let base_graph = graph_for(engine)?;
    let ledger = match engine {
        TheoryEngine::EnDqt(params) => {
            let mut l = ledger_for(params, &[])?;
            for lab in [LAB_A, LAB_B] {
                if l.initiator_kind(lab).is_none() {
                    l.add_initiator(lab, InitiatorKind::A);
                }
            }
            Some(l)
        }
        _ => None,
    };
    let measurements = |label: &str, angles: &[f64; 2]| -> Result<Vec<Measurement>> {
        angles
            .iter()
            .map(|&a| Measurement::new(format!("spin@{a}"), Observable::spin_along(label, a)?))
            .collect()
    };
    let alice = measurements(WING_A, &p.alice_angles)?;
    let bob = measurements(WING_B, &p.bob_angles)?;
    let reader = |lab: &str| -> Result<Measurement> { Measurement::new("record", Observable::computational(lab, 2)?) };
    let (read_a, read_b) = (reader(LAB_A)?, reader(LAB_B)?);
    let locations = LocationMap::new();
    let prelude = vec![Event::new(EventKind::Interaction, 0.0, [SOURCE, WING_A, WING_B]).with_detail(EMISSION)];

    let trial = |rng: &mut ChaCha8Rng, keep: bool| -> Result<TrialResult> {
        let s = rng.random_range(0..2usize);
        let t = rng.random_range(0..2usize);
        let mut graph = base_graph.clone();
        let mut events = Vec::new();
        let mut state = initial.clone();
        let mut tables = RelationalTables::default();
        let mut now = 1.0;
        let mut outcomes = Vec::with_capacity(2);
        for (wing, lab, m) in [(WING_A, LAB_A, &alice[s]), (WING_B, LAB_B, &bob[t])] {
            state = couple_pointer_into(&state, &m.pointer, lab)?;
            events.push(Event::new(EventKind::Interaction, now, [lab, wing]).with_detail(m.property.clone()));
            if !matches!(engine, TheoryEngine::EnDqt(_)) && !graph.is_ds_node(lab) && !graph.is_ds_node(wing) {
                graph.add_interaction(lab, wing, EdgeKind::Udi, false, now)?;
            }
            let evidence = static_evidence(&state, &m.pointer, p.apparatus_size, now, p.hold, &stability)?;
            let seen = match engine {
                TheoryEngine::Grw(params) => {
                    let (i, post, at) = grw_measure(
                        &state,
                        params,
                        lab,
                        p.apparatus_size,
                        m,
                        &mut graph,
                        &locations,
                        now,
                        &mut events,
                        rng,
                    )?;
                    state = post;
                    now = at;
                    Some(i)
                }
                TheoryEngine::Mwi(variant) => {
                    let (i, post) =
                        mwi_measure(&state, *variant, lab, m, &evidence, &mut graph, now, &mut events, rng)?;
                    state = post;
                    i
                }
                // the referee reads both records once they exist
                TheoryEngine::Relational(_) => None,
                TheoryEngine::EnDqt(_) => {
                    let ledger = ledger.as_ref().expect("EnDQT runs carry a ledger");
                    let (i, post) = endqt_measure(
                        &state,
                        ledger,
                        lab,
                        wing,
                        m,
                        &evidence,
                        &mut graph,
                        now,
                        &mut events,
                        rng,
                    )?;
                    state = post;
                    i
                }
            };
            outcomes.push(seen);
            now += p.hold;
        }
        if let TheoryEngine::Relational(variant) = engine {
            outcomes.clear();
            for read in [&read_a, &read_b] {
                let fact = relational_interact(&mut tables, &state, REFEREE, read, &graph, *variant, now, rng)?;
                if let Some(f) = &fact {
                    events.push(f.to_event());
                }
                outcomes.push(fact.map(|f| f.index));
            }
        }
        Ok(TrialResult {
            settings: vec![s, t],
            outcomes,
            record: keep.then_some(TrialRecord { events, graph }),
        })
    };
    aggregate(
        "epr_bell",
        engine,
        trials,
        seed,
        mode,
        OutcomeStats::new(&["s", "t"], &["x", "y"]),
        prelude,
        Vec::new(),
        ledger.clone(),
        trial,
    )
}
