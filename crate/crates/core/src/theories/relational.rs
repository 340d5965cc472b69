//! Relative facts: values that exist only relative to the observing system.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{born_sample, Measurement};
use crate::error::{Error, Result};
use crate::events::{Assignment, Event, EventKind};
use crate::hilbert::{CVector, StateVector};
use crate::structures::StructureGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationalVariant {
    /// Every interaction yields facts relative to the observer.
    Rqm,
    /// Only generator systems yield facts.
    SingleWorld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeFact {
    pub observer: String,
    pub observed: String,
    pub property: String,
    pub value: f64,
    pub index: usize,
    pub time: f64,
}

impl RelativeFact {
    pub fn to_event(&self) -> Event {
        Event::new(
            EventKind::RelativeFact,
            self.time,
            [self.observer.clone(), self.observed.clone()],
        )
        .with_values(vec![Assignment {
            system: self.observed.clone(),
            property: self.property.clone(),
            value: self.value,
            index: self.index,
        }])
        .with_detail(format!("relative to {}", self.observer))
    }
}

/// Facts held by each observer, with the pointer vectors needed to
/// condition on them later.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationalTables {
    tables: BTreeMap<String, Vec<(RelativeFact, CVector)>>,
}

impl RelationalTables {
    pub fn facts_of(&self, observer: &str) -> Vec<&RelativeFact> {
        self.tables
            .get(observer)
            .map(|t| t.iter().map(|(f, _)| f).collect())
            .unwrap_or_default()
    }

    /// Latest value of `property` of `observed` relative to `observer`.
    pub fn value_for(&self, observer: &str, observed: &str, property: &str) -> Option<f64> {
        self.tables
            .get(observer)?
            .iter()
            .rev()
            .find_map(|(f, _)| (f.observed == observed && f.property == property).then_some(f.value))
    }

    /// `state` conditioned on every fact `observer` holds, in order.
    pub fn relative_state(&self, state: &StateVector, observer: &str) -> Result<StateVector> {
        let mut st = state.clone();
        for (fact, v) in self.tables.get(observer).into_iter().flatten() {
            if !st.layout().contains(&fact.observed) {
                continue;
            }
            let (_, next) = st.project(&fact.observed, v)?;
            st = next.ok_or_else(|| {
                Error::integrity(format!(
                    "facts held by '{observer}' have zero joint weight in the current state"
                ))
            })?;
        }
        Ok(st)
    }
}

/// `observer` interacts with `m.system` and may obtain a relative fact.
///
/// The value is Born-sampled from the state relative to the observer,
/// conditioned on the observer's own facts and on the facts the observed
/// system already holds, since those records are shared by the interaction.
/// Only the observer's table changes. The single-world variant yields a
/// fact only when the observer is a generator.
#[allow(clippy::too_many_arguments)]
pub fn relational_interact<R: Rng + ?Sized>(
    tables: &mut RelationalTables,
    state: &StateVector,
    observer: &str,
    m: &Measurement,
    graph: &StructureGraph,
    variant: RelationalVariant,
    t: f64,
    rng: &mut R,
) -> Result<Option<RelativeFact>> {
    if observer == m.system {
        return Err(Error::invalid(format!("'{observer}' cannot interact with itself")));
    }
    let node = graph
        .node(observer)
        .ok_or_else(|| Error::invalid(format!("unknown observer '{observer}'")))?;
    if variant == RelationalVariant::SingleWorld && !node.generator {
        return Ok(None);
    }
    let own = tables.relative_state(state, observer)?;
    let shared = tables.relative_state(&own, &m.system)?;
    let probs = m.probabilities(&shared)?;
    let i = born_sample(&probs, rng)?;
    let fact = RelativeFact {
        observer: observer.to_string(),
        observed: m.system.clone(),
        property: m.property.clone(),
        value: m.pointer.eigenvalues()[i],
        index: i,
        time: t,
    };
    tables
        .tables
        .entry(observer.to_string())
        .or_default()
        .push((fact.clone(), m.pointer.eigenvector(i)));
    Ok(Some(fact))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomodels::von_neumann_couple;
    use crate::hilbert::linalg::c;
    use crate::hilbert::{Observable, Pauli, SpaceLayout};
    use crate::structures::{EdgeKind, SystemNode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z(label: &str) -> Measurement {
        Measurement::new("spin-z", Observable::pauli(label, Pauli::Z).unwrap()).unwrap()
    }

    fn singlet() -> StateVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_slice(
            &[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
            SpaceLayout::new([("A", 2), ("B", 2)]).unwrap(),
        )
        .unwrap()
    }

    fn graph(nodes: &[(&str, bool)]) -> StructureGraph {
        let mut g = StructureGraph::default();
        for (id, gen) in nodes {
            let n = if *gen {
                SystemNode::generator(*id)
            } else {
                SystemNode::non_generator(*id)
            };
            g.add_node(n).unwrap();
        }
        g
    }

    #[test]
    fn bobs_fact_is_invisible_to_alice() {
        let g = graph(&[("Alice", true), ("Bob", true), ("A", false), ("B", false)]);
        let mut tables = RelationalTables::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = singlet();
        let before = tables.facts_of("Alice").len();
        let fact = relational_interact(
            &mut tables,
            &st,
            "Bob",
            &z("B"),
            &g,
            RelationalVariant::Rqm,
            1.0,
            &mut rng,
        )
        .unwrap()
        .unwrap();
        assert_eq!(fact.observer, "Bob");
        assert_eq!(tables.facts_of("Alice").len(), before);
        assert!(tables.value_for("Alice", "B", "spin-z").is_none());
        assert_eq!(tables.value_for("Bob", "B", "spin-z"), Some(fact.value));
        // Alice's relative state is still the singlet
        assert_eq!(tables.relative_state(&st, "Alice").unwrap(), st);
    }

    #[test]
    fn self_interaction_is_rejected() {
        let g = graph(&[("B", true)]);
        let mut tables = RelationalTables::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = singlet();
        assert!(relational_interact(
            &mut tables,
            &st,
            "B",
            &z("B"),
            &g,
            RelationalVariant::Rqm,
            0.0,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn single_world_needs_a_generator_and_adds_no_udi() {
        let g = graph(&[("Bob", false), ("Dan", true), ("A", false), ("B", false)]);
        let mut tables = RelationalTables::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let st = singlet();
        let none = relational_interact(
            &mut tables,
            &st,
            "Bob",
            &z("B"),
            &g,
            RelationalVariant::SingleWorld,
            0.0,
            &mut rng,
        )
        .unwrap();
        assert!(none.is_none());
        let rqm = relational_interact(
            &mut tables,
            &st,
            "Bob",
            &z("B"),
            &g,
            RelationalVariant::Rqm,
            0.0,
            &mut rng,
        )
        .unwrap();
        assert!(rqm.is_some());
        let some = relational_interact(
            &mut tables,
            &st,
            "Dan",
            &z("B"),
            &g,
            RelationalVariant::SingleWorld,
            0.0,
            &mut rng,
        )
        .unwrap();
        assert!(some.is_some());
        assert!(!g.has_edge("A", "B", EdgeKind::Udi));
    }

    #[test]
    fn shared_records_keep_a_chain_consistent() {
        let g = graph(&[("S1", true), ("S2", true), ("S3", true)]);
        let ready = |l: &str| StateVector::single(l, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tables = RelationalTables::default();
            // S1 in superposition, recorded by S2, whose record is recorded by S3
            let s1 = StateVector::single("S1", &[c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
            let st = von_neumann_couple(&s1, &ready("S2")).unwrap();
            let f12 = relational_interact(
                &mut tables,
                &st,
                "S2",
                &z("S1"),
                &g,
                RelationalVariant::Rqm,
                1.0,
                &mut rng,
            )
            .unwrap()
            .unwrap();
            // S3 couples to S2 (CNOT-style record), then observes S2's record
            let joint = st.tensor(&ready("S3")).unwrap();
            let cnot = crate::hilbert::linalg::cnot();
            let joint = joint.evolve_local(&cnot, &["S2", "S3"]).unwrap();
            let f23 = relational_interact(
                &mut tables,
                &joint,
                "S3",
                &z("S2"),
                &g,
                RelationalVariant::Rqm,
                2.0,
                &mut rng,
            )
            .unwrap()
            .unwrap();
            assert_eq!(f12.index, f23.index, "seed {seed}");
        }
    }
}
