//! Theory engines: spontaneous collapse, branching, relational facts and
//! determination-capacity chains.
//!
//! Every engine samples outcomes through [`born_sample`], so runs with the
//! same seed policy are comparable across engines.

mod endqt;
mod grw;
mod mwi;
mod relational;

pub use endqt::{
    endqt_determinate_event, endqt_grant_dc, DcLedger, DcRecord, DeterminateOutcome, EnDqtParams, GrantOutcome,
    InitiatorKind,
};
pub use grw::{grw_collapse_propagate, grw_step, CollapseEvent, CollapsePropagation, GrwParams, LocationMap};
pub use mwi::{mwi_branch, BranchBook, MwiVariant, World, WorldSet};
pub use relational::{relational_interact, RelationalTables, RelationalVariant, RelativeFact};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decomodels::von_neumann_couple_pointer;
use crate::differentiation::{ProcessClass, ProcessEvidence, ProcessKind};
use crate::error::{Error, Result};
use crate::events::Assignment;
use crate::hilbert::{Observable, SpaceLayout, StateVector};
use crate::structures::{StructureGraph, SystemNode, UdiPolicy};
use crate::tol;

/// A property of one factor, measured in the eigenbasis of `pointer`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub system: String,
    pub property: String,
    pub pointer: Observable,
}

impl Measurement {
    pub fn new(property: impl Into<String>, pointer: Observable) -> Result<Self> {
        let system = pointer
            .single_factor()
            .ok_or_else(|| Error::invalid("measured observable must act on a single factor"))?
            .to_string();
        Ok(Self {
            system,
            property: property.into(),
            pointer,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.pointer.eigenvalues().len()
    }

    /// Born weights of each pointer outcome in `state`.
    pub fn probabilities(&self, state: &StateVector) -> Result<Vec<f64>> {
        let m = state.as_matrix(&[&self.system])?;
        let coeffs = self.pointer.eigenvectors().adjoint() * m;
        Ok((0..coeffs.nrows()).map(|i| coeffs.row(i).norm_squared()).collect())
    }

    /// Conditions `state` on outcome `i`; `None` if it has zero weight.
    pub fn condition(&self, state: &StateVector, i: usize) -> Result<(f64, Option<StateVector>)> {
        state.project(&self.system, &self.pointer.eigenvector(i))
    }

    pub fn assignment(&self, i: usize) -> Assignment {
        Assignment {
            system: self.system.clone(),
            property: self.property.clone(),
            value: self.pointer.eigenvalues()[i],
            index: i,
        }
    }

    /// The same pointer basis on a different factor of equal dimension.
    pub(crate) fn relabeled(&self, factor: &str) -> Result<Measurement> {
        let layout = SpaceLayout::single(factor, self.outcomes())?;
        let pointer = Observable::from_eigenbasis(
            self.pointer.eigenvalues().to_vec(),
            self.pointer.eigenvectors().clone(),
            layout,
        )?;
        Measurement::new(self.property.clone(), pointer)
    }
}

/// Draws an index with probability proportional to `weights`.
pub fn born_sample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let clean: Vec<f64> = weights.iter().map(|w| w.max(0.0)).collect();
    let dist = WeightedIndex::new(&clean).map_err(|e| Error::integrity(format!("Born weights unusable: {e}")))?;
    Ok(dist.sample(rng))
}

/// Samples a pointer outcome and conditions the state on it.
pub(crate) fn measure<R: Rng + ?Sized>(
    state: &StateVector,
    m: &Measurement,
    rng: &mut R,
) -> Result<(usize, Vec<f64>, StateVector)> {
    let probs = m.probabilities(state)?;
    let i = born_sample(&probs, rng)?;
    let (_, post) = m.condition(state, i)?;
    let post = post.ok_or_else(|| Error::integrity("sampled an outcome of zero weight"))?;
    Ok((i, probs, post))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TheoryEngine {
    Grw(GrwParams),
    Mwi(MwiVariant),
    Relational(RelationalVariant),
    EnDqt(EnDqtParams),
}

impl TheoryEngine {
    pub fn name(&self) -> &'static str {
        match self {
            TheoryEngine::Grw(_) => "grw",
            TheoryEngine::Mwi(MwiVariant::QuasiLocal) => "mwi-quasi-local",
            TheoryEngine::Mwi(MwiVariant::Local) => "mwi-local",
            TheoryEngine::Mwi(MwiVariant::Global) => "mwi-global",
            TheoryEngine::Relational(RelationalVariant::Rqm) => "rqm",
            TheoryEngine::Relational(RelationalVariant::SingleWorld) => "single-world-relational",
            TheoryEngine::EnDqt(_) => "endqt",
        }
    }

    /// One measurement of `m` on a lone system by a generator apparatus,
    /// run through this engine's own mechanism. Returns the outcome index.
    ///
    /// GRW couples the system to a two-site pointer particle and waits for
    /// its collapse; MWI branches and self-locates by weight; the relational
    /// engines record a fact; EnDQT lets an initiator apparatus fire a
    /// determinate-value event.
    pub fn single_measurement<R: Rng + ?Sized>(
        &self,
        system: &StateVector,
        m: &Measurement,
        rng: &mut R,
    ) -> Result<usize> {
        if system.layout().len() != 1 || m.pointer.layout() != system.layout() {
            return Err(Error::invalid(
                "single measurement needs a one-factor system matching the pointer",
            ));
        }
        let apparatus = "apparatus";
        let ready = StateVector::basis(SpaceLayout::single(apparatus, m.outcomes().max(2))?, 0)?;
        let joint = von_neumann_couple_pointer(system, &m.pointer, &ready)?;
        let decohered = ProcessClass {
            kind: ProcessKind::QuasiIrreversible,
            evidence: ProcessEvidence {
                env_size: usize::MAX,
                recurrence_estimate: None,
                sustained_below_eps: f64::INFINITY,
            },
        };
        let mut graph = StructureGraph::new(UdiPolicy::Propagate);
        graph.add_node(SystemNode::generator(apparatus))?;
        graph.add_node(SystemNode::generator(m.system.clone()))?;

        match self {
            TheoryEngine::Grw(params) => {
                if params.lambda <= 0.0 {
                    return Err(Error::invalid("GRW measurement needs a positive collapse rate"));
                }
                let dt = 1.0 / params.lambda;
                let mut state = joint;
                for step in 0..100_000 {
                    let (next, events) = grw_step(&state, &[apparatus], params, step as f64 * dt, dt, None, rng)?;
                    state = next;
                    if !events.is_empty() {
                        let probs = m.probabilities(&state)?;
                        return Ok(argmax(&probs));
                    }
                }
                Err(Error::integrity("no collapse after 100000 mean lifetimes"))
            }
            TheoryEngine::Mwi(variant) => {
                let worlds = mwi_branch(&joint, apparatus, m, *variant, &graph, &decohered, 0.0)?;
                let weights: Vec<f64> = worlds.worlds().iter().map(|w| w.weight).collect();
                let k = born_sample(&weights, rng)?;
                Ok(worlds.worlds()[k].outcome)
            }
            TheoryEngine::Relational(variant) => {
                let mut tables = RelationalTables::default();
                let fact = relational_interact(&mut tables, &joint, apparatus, m, &graph, *variant, 0.0, rng)?
                    .ok_or_else(|| Error::integrity("generator apparatus produced no fact"))?;
                Ok(fact.index)
            }
            TheoryEngine::EnDqt(_) => {
                let mut ledger = DcLedger::default();
                ledger.add_initiator(apparatus, InitiatorKind::A);
                let out = endqt_determinate_event(
                    &joint, &ledger, apparatus, &m.system, m, &decohered, &mut graph, 0.0, rng,
                )?;
                out.assignments
                    .iter()
                    .find(|a| a.system == m.system)
                    .map(|a| a.index)
                    .ok_or_else(|| Error::integrity("initiator apparatus produced no value"))
            }
        }
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Marginal in a pointer basis is concentrated on one outcome.
pub(crate) fn dominant(p: &[f64], threshold: f64) -> Option<usize> {
    let i = argmax(p);
    (p[i] > threshold).then_some(i)
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > tol::COMPLETENESS || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::integrity(format!("weights sum to {sum}")));
    }
    Ok(())
}
