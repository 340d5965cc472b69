//! Spontaneous localization on lattice position factors.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{argmax, born_sample, dominant};
use crate::error::{Error, Result};
use crate::events::{Assignment, Event, EventKind};
use crate::hilbert::{CMatrix, StateVector, C64};
use crate::structures::{EdgeKind, StructureGraph};

/// Collapse rate per generator per unit time and localization width in
/// lattice units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrwParams {
    pub lambda: f64,
    pub sigma: f64,
}

impl GrwParams {
    /// `lambda = 0` is accepted here so the collapse-free limit can be run;
    /// configuration files insist on a positive rate.
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "collapse rate must be finite and >= 0, got {lambda}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "localization width must be finite and > 0, got {sigma}"
            )));
        }
        Ok(Self { lambda, sigma })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub generator: String,
    pub time: f64,
    pub center: usize,
    /// Position marginal just before this collapse.
    pub born: Vec<f64>,
}

impl CollapseEvent {
    pub fn to_event(&self) -> Event {
        Event::new(EventKind::Collapse, self.time, [self.generator.clone()])
            .with_values(vec![Assignment {
                system: self.generator.clone(),
                property: "position".into(),
                value: self.center as f64,
                index: self.center,
            }])
            .with_weights(self.born.clone())
    }
}

/// One step of length `dt` starting at `t`: optional unitary first, then a
/// Poisson(λ dt) number of hits on each generator. Each hit draws a center
/// from the Born marginal, multiplies by `exp(−(x−c)²/(4σ²))` on that factor
/// and renormalizes.
///
/// A Poisson count per step makes the chance of at least one hit exactly
/// `1 − exp(−λ dt)` and keeps the total over many steps Poisson(λ n T).
pub fn grw_step<R: Rng + ?Sized>(
    state: &StateVector,
    generators: &[&str],
    params: &GrwParams,
    t: f64,
    dt: f64,
    unitary: Option<&CMatrix>,
    rng: &mut R,
) -> Result<(StateVector, Vec<CollapseEvent>)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    for g in generators {
        if !state.layout().contains(g) {
            return Err(Error::invalid(format!("generator '{g}' is not a factor of the state")));
        }
    }
    let mut state = match unitary {
        Some(u) => state.evolve(u)?,
        None => state.clone(),
    };
    let mut events = Vec::new();
    let mean = params.lambda * dt;
    if mean <= 0.0 {
        return Ok((state, events));
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::invalid(format!("collapse rate: {e}")))?;
    for g in generators {
        let hits = poisson.sample(rng) as u64;
        for _ in 0..hits {
            let born = state.marginal(g)?;
            let center = born_sample(&born, rng)?;
            state = localize(&state, g, center, params.sigma)?;
            events.push(CollapseEvent {
                generator: g.to_string(),
                time: t + dt,
                center,
                born,
            });
        }
    }
    Ok((state, events))
}

fn localize(state: &StateVector, factor: &str, center: usize, sigma: f64) -> Result<StateVector> {
    let sites = state
        .layout()
        .factor_dim(factor)
        .ok_or_else(|| Error::invalid(format!("unknown factor '{factor}'")))?;
    let gauss = CMatrix::from_fn(sites, sites, |i, j| {
        if i == j {
            let d = i as f64 - center as f64;
            C64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let v = state.apply_local(&gauss, &[factor])?;
    if v.norm() == 0.0 {
        return Err(Error::integrity(format!(
            "localization on '{factor}' annihilated the state"
        )));
    }
    StateVector::normalized(v, state.layout().clone())
}

/// Location tag of every lattice site, per factor, used to promote
/// potential destruction when a factor localizes.
pub type LocationMap = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CollapsePropagation {
    pub assignments: Vec<Assignment>,
    /// Factors that became determinate because of this collapse.
    pub affected: Vec<String>,
    /// Nodes whose potential destruction was promoted.
    pub promoted: Vec<String>,
}

impl CollapsePropagation {
    pub fn events(&self, collapsed: &str, t: f64) -> Vec<Event> {
        let mut out: Vec<Event> = self
            .promoted
            .iter()
            .map(|n| Event::new(EventKind::Destruction, t, [n.clone()]))
            .collect();
        let mut systems = vec![collapsed.to_string()];
        systems.extend(self.affected.iter().cloned());
        out.push(Event::new(EventKind::DeterminateValue, t, systems).with_values(self.assignments.clone()));
        out
    }
}

/// Share of a factor's computational-basis weight that must sit on one
/// index for it to count as determinate after a collapse.
pub const DOMINANT_SITE: f64 = 0.99;

/// Bookkeeping after a collapse on `collapsed`: factors whose marginal went
/// from spread to concentrated (> 0.99) get values, potential destruction
/// on them (and on the collapsed node) is promoted to the surviving site,
/// and the collapsed generator gains SDIs to every affected node.
///
/// Factors that are not graph nodes still receive values.
pub fn grw_collapse_propagate(
    before: &StateVector,
    after: &StateVector,
    collapsed: &CollapseEvent,
    graph: &mut StructureGraph,
    locations: &LocationMap,
) -> Result<CollapsePropagation> {
    let t = collapsed.time;
    let mut assignments = vec![Assignment {
        system: collapsed.generator.clone(),
        property: "position".into(),
        value: collapsed.center as f64,
        index: collapsed.center,
    }];
    let mut affected = Vec::new();
    for f in after.layout().factors() {
        if f.label == collapsed.generator {
            continue;
        }
        let was = dominant(&before.marginal(&f.label)?, DOMINANT_SITE);
        let now = dominant(&after.marginal(&f.label)?, DOMINANT_SITE);
        if let (None, Some(i)) = (was, now) {
            assignments.push(Assignment {
                system: f.label.clone(),
                property: "computational".into(),
                value: i as f64,
                index: i,
            });
            affected.push(f.label.clone());
        }
    }

    let mut promoted = Vec::new();
    let site_of = |label: &str| -> Result<usize> {
        if label == collapsed.generator {
            Ok(collapsed.center)
        } else {
            Ok(argmax(&after.marginal(label)?))
        }
    };
    for label in std::iter::once(&collapsed.generator).chain(&affected) {
        if !graph.has_potential_destruction(label) {
            continue;
        }
        let tags = locations
            .get(label)
            .ok_or_else(|| Error::invalid(format!("no location tags for '{label}'")))?;
        let site = site_of(label)?;
        let tag = tags
            .get(site)
            .ok_or_else(|| Error::invalid(format!("'{label}' has no location tag for site {site}")))?;
        graph.promote_destruction(label, tag, t)?;
        promoted.push(label.clone());
    }
    if graph.contains(&collapsed.generator) {
        graph.mark_determinate(&collapsed.generator, t)?;
        for a in &affected {
            if graph.contains(a) && !graph.has_edge(&collapsed.generator, a, EdgeKind::Sdi) {
                graph.add_interaction(&collapsed.generator, a, EdgeKind::Sdi, true, t)?;
            }
        }
    }
    Ok(CollapsePropagation {
        assignments,
        affected,
        promoted,
    })
}
