//! Two-path system coupled to a which-path probe of adjustable strength.
//!
//! The probe `E` rotates by `θ` only when the system `S` takes the lower
//! path, so the two conditional probe states overlap by `cos θ`.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{OutcomeStats, RunReport};
use crate::decomodels::{evolve_between, run_schedule_until, InteractionSchedule, ScheduleEntry};
use crate::differentiation::{degree_of_differentiation, environment_overlaps, DifferentiationReport, StabilityParams};
use crate::error::{Error, Result};
use crate::events::{Event, EventKind, EventLog};
use crate::hilbert::linalg::c;
use crate::hilbert::{Observable, Pauli, SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph, SystemNode};
use crate::theories::TheoryEngine;

pub(super) const FACTORS: [&str; 2] = ["S", "E"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakSweepParams {
    pub strengths: Vec<f64>,
}

impl Default for WeakSweepParams {
    fn default() -> Self {
        Self {
            strengths: (0..10).map(|k| FRAC_PI_2 * k as f64 / 9.0).collect(),
        }
    }
}

impl WeakSweepParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.strengths.is_empty() {
            errs.push("strengths must not be empty".to_string());
        }
        for (i, s) in self.strengths.iter().enumerate() {
            if !(*s >= 0.0 && s.is_finite()) {
                errs.push(format!("strengths[{i}] must be finite and >= 0, got {s}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakRow {
    pub strength: f64,
    /// `|⟨E_up|E_down⟩|` after the coupling.
    pub overlap: f64,
    pub d_star: f64,
    /// Magnitude of the path coherence relative to its maximum, `2|ρ_01|`.
    pub visibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTable {
    pub rows: Vec<WeakRow>,
}

impl WeakTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strength,overlap,d_star,visibility\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.strength, r.overlap, r.d_star, r.visibility);
        }
        out
    }
}

fn prepared() -> Result<StateVector> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let s = StateVector::single("S", &[c(h, 0.0), c(h, 0.0)])?;
    s.tensor(&StateVector::basis(SpaceLayout::single("E", 2)?, 0)?)
}

fn probe(strength: f64) -> Result<InteractionSchedule> {
    InteractionSchedule::new(vec![ScheduleEntry::new(0.0, 1.0, "S", "E", "dy", strength)])
}

/// One row per coupling strength, in the given order.
pub fn weak_sweep(strengths: &[f64]) -> Result<WeakTable> {
    WeakSweepParams {
        strengths: strengths.to_vec(),
    }
    .validate()?;
    let initial = prepared()?;
    let pointer = Observable::pauli("S", Pauli::Z)?;
    let rows = strengths
        .iter()
        .map(|&g| {
            let fin = evolve_between(&initial, &probe(g)?, 0.0, 1.0)?;
            let overlap = environment_overlaps(&fin, "S", &pointer, 1.0)?.get(0, 1).norm();
            let rho = fin.reduced(&["S"])?;
            Ok(WeakRow {
                strength: g,
                overlap,
                d_star: degree_of_differentiation(&rho)?,
                visibility: 2.0 * rho.matrix()[(0, 1)].norm(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(WeakTable { rows })
}

pub(super) fn run(p: &WeakSweepParams, engine: &TheoryEngine, seed: u64) -> Result<RunReport> {
    let table = weak_sweep(&p.strengths)?;
    let stability = StabilityParams::default();
    let initial = prepared()?;
    let mut reports = Vec::with_capacity(p.strengths.len());
    let mut log = EventLog::new();
    for row in &table.rows {
        let traj = run_schedule_until(&initial, &probe(row.strength)?, 0.05, 1.0)?;
        let mut r = DifferentiationReport::new("which-path", "S", format!("strength={}", row.strength));
        for (t, s) in traj.times.iter().zip(&traj.states) {
            r.push(*t, degree_of_differentiation(&s.reduced(&["S"])?)?)?;
        }
        r.finalize(stability.eps, stability.window);
        reports.push(r);
        log.push(
            Event::new(EventKind::Interaction, 0.0, ["S", "E"])
                .with_weights(vec![row.overlap, row.d_star, row.visibility])
                .with_detail(format!("strength {}", row.strength)),
        );
    }
    let mut graph = StructureGraph::default();
    graph.add_node(SystemNode::non_generator("S"))?;
    graph.add_node(SystemNode::non_generator("E"))?;
    graph.add_interaction("S", "E", EdgeKind::Udi, false, 0.0)?;
    log.push(Event::new(EventKind::GraphSnapshot, 1.0, Vec::<String>::new()).with_detail(graph.to_json()));
    Ok(RunReport {
        scenario: "weak_sweep".into(),
        engine: engine.name().into(),
        seed,
        trials: 1,
        log,
        stats: OutcomeStats::default(),
        graph,
        reports,
        ledger: None,
        sweep: Some(table),
    })
}
