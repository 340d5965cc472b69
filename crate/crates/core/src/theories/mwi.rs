//! Branching into worlds once decoherence is quasi-irreversible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{check_weights, Measurement};
use crate::differentiation::ProcessClass;
use crate::error::{Error, Result};
use crate::events::{Assignment, Event, EventKind};
use crate::hilbert::{DensityOperator, StateVector};
use crate::structures::{EdgeKind, Membership, StructureGraph, UdiPolicy};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MwiVariant {
    /// Entangled remote partners are differentiated in each world at once.
    QuasiLocal,
    /// Worlds split only locally; remote partners stay undifferentiated.
    Local,
    /// Every system joins the branching DS immediately.
    Global,
}

impl MwiVariant {
    pub fn policy(self) -> UdiPolicy {
        match self {
            MwiVariant::Local => UdiPolicy::Detach,
            MwiVariant::QuasiLocal | MwiVariant::Global => UdiPolicy::Propagate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub weight: f64,
    /// Pointer outcome defining this world (0 for the unsplit world).
    pub outcome: usize,
    pub state: StateVector,
    pub values: BTreeMap<(String, String), f64>,
    pub graph: StructureGraph,
    /// Reduced states of the remote partners as they stand in this world.
    pub remote: BTreeMap<String, DensityOperator>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSet {
    worlds: Vec<World>,
    branched: bool,
}

impl WorldSet {
    fn new(mut worlds: Vec<World>, branched: bool) -> Result<Self> {
        worlds.retain(|w| w.weight >= tol::WORLD_PRUNE);
        let total: f64 = worlds.iter().map(|w| w.weight).sum();
        if total <= 0.0 {
            return Err(Error::integrity("every world was pruned"));
        }
        for w in &mut worlds {
            w.weight /= total;
        }
        check_weights(&worlds.iter().map(|w| w.weight).collect::<Vec<_>>())?;
        Ok(Self { worlds, branched })
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    pub fn len(&self) -> usize {
        self.worlds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.worlds.is_empty()
    }

    /// False when the precondition failed and the single input world was
    /// returned unchanged.
    pub fn branched(&self) -> bool {
        self.branched
    }

    pub fn to_event(&self, systems: &[&str], t: f64) -> Event {
        let kind = if self.branched {
            EventKind::Branch
        } else {
            EventKind::NoEvent
        };
        let mut e =
            Event::new(kind, t, systems.iter().copied()).with_weights(self.worlds.iter().map(|w| w.weight).collect());
        if !self.branched {
            e = e.with_detail("process is reversible: no branching");
        }
        e
    }
}

/// Branches `state` on the pointer basis of `m` after `apparatus`
/// decohered `m.system`.
///
/// Without quasi-irreversible evidence the result is the single unchanged
/// world. Otherwise there is one world per pointer component of weight
/// above the pruning threshold, each carrying the conditioned state, the
/// measured value and its own copy of `graph`.
pub fn mwi_branch(
    state: &StateVector,
    apparatus: &str,
    m: &Measurement,
    variant: MwiVariant,
    graph: &StructureGraph,
    evidence: &ProcessClass,
    t: f64,
) -> Result<WorldSet> {
    for id in [apparatus, m.system.as_str()] {
        if !graph.contains(id) {
            return Err(Error::invalid(format!("'{id}' is not a node of the structure graph")));
        }
    }
    let partners = partners_of(graph, &m.system, state)?;
    if !evidence.is_quasi_irreversible() {
        let remote = reduced_map(state, &partners)?;
        let world = World {
            weight: 1.0,
            outcome: 0,
            state: state.clone(),
            values: BTreeMap::new(),
            graph: graph.clone(),
            remote,
        };
        return WorldSet::new(vec![world], false);
    }

    let probs = m.probabilities(state)?;
    let universal_remote = reduced_map(state, &partners)?;
    let mut worlds = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        if p < tol::WORLD_PRUNE {
            continue;
        }
        let (_, cond) = m.condition(state, i)?;
        let Some(cond) = cond else { continue };
        let mut values = BTreeMap::new();
        values.insert((m.system.clone(), m.property.clone()), m.pointer.eigenvalues()[i]);

        let mut g = graph.clone();
        g.set_policy(variant.policy());
        g.add_interaction(apparatus, &m.system, EdgeKind::Sdi, true, t)?;

        let remote = match variant {
            MwiVariant::Local => universal_remote.clone(),
            MwiVariant::QuasiLocal | MwiVariant::Global => {
                for p in &partners {
                    if let Some(a) = sharp_value(&cond, m, p)? {
                        values.insert((p.clone(), m.property.clone()), a.value);
                    }
                }
                reduced_map(&cond, &partners)?
            }
        };
        if variant == MwiVariant::Global {
            let others: Vec<String> = g.nodes().map(|n| n.id.clone()).collect();
            for id in others {
                if id != m.system && !g.is_ds_node(&id) && !g.has_potential_destruction(&id) {
                    g.add_interaction(&m.system, &id, EdgeKind::Sdi, true, t)?;
                }
            }
        }
        worlds.push(World {
            weight: p,
            outcome: i,
            state: cond,
            values,
            graph: g,
            remote,
        });
    }
    WorldSet::new(worlds, true)
}

/// Nodes sharing an IS component with `system` that are factors of `state`.
fn partners_of(graph: &StructureGraph, system: &str, state: &StateVector) -> Result<Vec<String>> {
    let part = graph.partition()?;
    let own = part[system];
    if matches!(own, Membership::Ds(_)) {
        return Ok(Vec::new());
    }
    Ok(part
        .iter()
        .filter(|(id, m)| **m == own && id.as_str() != system && state.layout().contains(id))
        .map(|(id, _)| id.clone())
        .collect())
}

fn reduced_map(state: &StateVector, labels: &[String]) -> Result<BTreeMap<String, DensityOperator>> {
    labels.iter().map(|l| Ok((l.clone(), state.reduced(&[l])?))).collect()
}

/// Value of the same property on `partner` if it is fixed in `state`.
fn sharp_value(state: &StateVector, m: &Measurement, partner: &str) -> Result<Option<Assignment>> {
    if state.layout().factor_dim(partner) != Some(m.outcomes()) {
        return Ok(None);
    }
    let pm = m.relabeled(partner)?;
    let probs = pm.probabilities(state)?;
    Ok(super::dominant(&probs, 1.0 - tol::COMPLETENESS).map(|i| pm.assignment(i)))
}

/// Per-wing branch record for local branching: each wing's worlds are
/// kept separately and only paired up when the wings meet.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchBook {
    wings: Vec<(String, Measurement, Vec<(usize, f64)>)>,
}

impl BranchBook {
    pub fn record(&mut self, wing: &str, m: &Measurement, worlds: &WorldSet) {
        let outcomes = worlds.worlds().iter().map(|w| (w.outcome, w.weight)).collect();
        self.wings.push((wing.to_string(), m.clone(), outcomes));
    }

    pub fn wings(&self) -> Vec<&str> {
        self.wings.iter().map(|(w, _, _)| w.as_str()).collect()
    }

    /// Every combination of one world per wing.
    pub fn pairs(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for (_, _, outcomes) in &self.wings {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    outcomes.iter().map(move |(o, _)| {
                        let mut v = prefix.clone();
                        v.push(*o);
                        v
                    })
                })
                .collect();
        }
        out
    }

    /// Joint Born weight of each combination in `universal`, the unsplit
    /// state, once the wings compare records.
    pub fn meeting_weights(&self, universal: &StateVector) -> Result<Vec<(Vec<usize>, f64)>> {
        self.pairs()
            .into_iter()
            .map(|combo| {
                // product of sequential conditional probabilities
                let mut w = 1.0;
                let mut cur = universal.clone();
                for ((_, m, _), &o) in self.wings.iter().zip(&combo) {
                    let (p, next) = m.condition(&cur, o)?;
                    w *= p;
                    match next {
                        Some(n) => cur = n,
                        None => return Ok((combo, 0.0)),
                    }
                }
                Ok((combo, w))
            })
            .collect()
    }
}
