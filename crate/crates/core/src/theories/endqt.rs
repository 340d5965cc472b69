//! Determination capacity (DC): who can give whom determinate values.
//!
//! Initiators of kind A hold DC concerning every system. Kind B initiators
//! hold only the DC seeded for them by configuration. Everyone else obtains
//! DC through grants along an interaction schedule. A system `Y` being
//! decohered by a holder `X` passes DC concerning `Z` to itself when `Z`
//! starts interacting with `Y` strictly inside the X–Y interval without
//! disturbing `Y`'s pointer.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{measure, Measurement};
use crate::decomodels::InteractionSchedule;
use crate::differentiation::{commutator_residual, ProcessClass, StabilityParams};
use crate::error::{Error, Result};
use crate::events::{Assignment, Event, EventKind};
use crate::hilbert::{embed, SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitiatorKind {
    /// DC concerning any system.
    A,
    /// DC only for the targets seeded for it.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcRecord {
    pub holder: String,
    pub target: String,
    pub granted_at: f64,
    /// The system whose interaction passed the DC on; the holder itself for
    /// seeded records.
    pub via: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnDqtParams {
    pub initiators: Vec<(String, InitiatorKind)>,
    /// `(holder, target)` records seeded for kind B initiators at time 0.
    pub seeds: Vec<(String, String)>,
    /// Composite systems as lists of factor labels.
    pub composites: Vec<(String, Vec<String>)>,
    pub stability: StabilityParams,
    /// Tolerance of the non-disturbance commutator test.
    pub commute_tol: f64,
}

impl Default for EnDqtParams {
    fn default() -> Self {
        Self {
            initiators: Vec::new(),
            seeds: Vec::new(),
            composites: Vec::new(),
            stability: StabilityParams::default(),
            commute_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DcLedger {
    initiators: BTreeMap<String, InitiatorKind>,
    composites: BTreeMap<String, Vec<String>>,
    records: Vec<DcRecord>,
}

impl DcLedger {
    pub fn from_params(params: &EnDqtParams) -> Result<Self> {
        let mut ledger = Self::default();
        for (label, kind) in &params.initiators {
            ledger.add_initiator(label, *kind);
        }
        for (label, parts) in &params.composites {
            ledger.add_composite(label, parts.iter().map(String::as_str))?;
        }
        for (holder, target) in &params.seeds {
            ledger.seed(holder, target, 0.0)?;
        }
        Ok(ledger)
    }

    pub fn add_initiator(&mut self, label: &str, kind: InitiatorKind) {
        self.initiators.insert(label.to_string(), kind);
    }

    pub fn add_composite<'a>(&mut self, label: &str, parts: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let parts: Vec<String> = parts.into_iter().map(str::to_string).collect();
        if parts.is_empty() {
            return Err(Error::invalid(format!("composite '{label}' has no parts")));
        }
        for p in &parts {
            if let Some(owner) = self.composites.iter().find(|(_, ps)| ps.contains(p)).map(|(o, _)| o) {
                return Err(Error::invalid(format!("factor '{p}' already belongs to '{owner}'")));
            }
        }
        self.composites.insert(label.to_string(), parts);
        Ok(())
    }

    /// Seeds a record for a kind B initiator.
    pub fn seed(&mut self, holder: &str, target: &str, t: f64) -> Result<()> {
        if self.initiators.get(holder) != Some(&InitiatorKind::B) {
            return Err(Error::invalid(format!("'{holder}' is not a kind B initiator")));
        }
        if holder == target {
            return Err(Error::invalid("a system cannot hold DC concerning itself"));
        }
        self.records.push(DcRecord {
            holder: holder.to_string(),
            target: target.to_string(),
            granted_at: t,
            via: holder.to_string(),
        });
        Ok(())
    }

    pub fn records(&self) -> &[DcRecord] {
        &self.records
    }

    pub fn initiator_kind(&self, label: &str) -> Option<InitiatorKind> {
        self.initiators.get(label).copied()
    }

    /// System a factor belongs to: its composite, or the factor itself.
    pub fn system_of(&self, factor: &str) -> String {
        self.composites
            .iter()
            .find(|(_, ps)| ps.iter().any(|p| p == factor))
            .map_or_else(|| factor.to_string(), |(c, _)| c.clone())
    }

    pub fn parts(&self, system: &str) -> Option<&[String]> {
        self.composites.get(system).map(Vec::as_slice)
    }

    /// Whether `holder` has DC concerning `target` at time `t`.
    ///
    /// A composite holds DC concerning a target when each of its parts holds
    /// it for the target or for every part of the target.
    pub fn has_dc(&self, holder: &str, target: &str, t: f64) -> bool {
        if holder == target {
            return false;
        }
        if self.initiators.get(holder) == Some(&InitiatorKind::A) {
            return true;
        }
        if self.direct(holder, target, t) {
            return true;
        }
        if let Some(parts) = self.parts(target) {
            if parts.iter().all(|p| self.direct(holder, p, t)) {
                return true;
            }
        }
        match self.parts(holder) {
            Some(parts) => parts.iter().all(|p| {
                self.has_dc(p, target, t)
                    || self
                        .parts(target)
                        .is_some_and(|tp| tp.iter().all(|q| self.has_dc(p, q, t)))
            }),
            None => false,
        }
    }

    fn direct(&self, holder: &str, target: &str, t: f64) -> bool {
        self.records
            .iter()
            .any(|r| r.holder == holder && r.target == target && r.granted_at <= t)
    }

    /// Every record's chain of grantors ends at an initiator, and each
    /// grantor held DC concerning the holder when it granted.
    pub fn audit(&self) -> Result<()> {
        for r in &self.records {
            if r.holder == r.target {
                return Err(Error::integrity(format!("'{}' holds DC concerning itself", r.holder)));
            }
            if r.via == r.holder {
                if self.initiators.get(&r.holder) != Some(&InitiatorKind::B) {
                    return Err(Error::integrity(format!(
                        "seeded record for non-initiator '{}'",
                        r.holder
                    )));
                }
                continue;
            }
            if !self.has_dc(&r.via, &r.holder, r.granted_at) {
                return Err(Error::integrity(format!(
                    "'{}' granted DC to '{}' without holding DC concerning it",
                    r.via, r.holder
                )));
            }
            let mut seen = BTreeSet::new();
            let mut cur = r.via.clone();
            loop {
                if self.initiators.contains_key(&cur) {
                    break;
                }
                if !seen.insert(cur.clone()) {
                    return Err(Error::integrity(format!("grant chain through '{cur}' is circular")));
                }
                match self.records.iter().find(|q| q.holder == cur) {
                    Some(q) => cur = q.via.clone(),
                    None => {
                        return Err(Error::integrity(format!(
                            "grant chain of '{}' does not reach an initiator",
                            r.holder
                        )))
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result of examining one `(X–Y, Z–Y)` pair of schedule entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantOutcome {
    pub grantor: String,
    pub holder: String,
    pub target: String,
    pub time: f64,
    pub granted: bool,
    pub reason: Option<String>,
}

impl GrantOutcome {
    pub fn to_event(&self) -> Event {
        let kind = if self.granted {
            EventKind::DcGrant
        } else {
            EventKind::DcRefused
        };
        let mut e = Event::new(
            kind,
            self.time,
            [self.grantor.clone(), self.holder.clone(), self.target.clone()],
        );
        if let Some(r) = &self.reason {
            e = e.with_detail(r.clone());
        }
        e
    }
}

/// Scans every ordered pair of schedule entries sharing a system `Y`,
/// where the first links `Y` to a DC holder `X` and the second links `Y` to
/// a third system `Z`. Grants `Y` DC concerning `Z` when `Z`'s interaction
/// starts strictly inside the X–Y interval, `evidence[i]` for the X–Y entry
/// is quasi-irreversible, and the Z–Y coupling commutes with the X–Y
/// pointer on `Y` within `commute_tol`. The grant time is the end of X–Y.
///
/// Pairs whose `X` lacks DC concerning `Y` are skipped. Grants are applied
/// in time order and the scan repeats until nothing changes, so chains
/// form in one call.
pub fn endqt_grant_dc(
    schedule: &InteractionSchedule,
    evidence: &BTreeMap<usize, ProcessClass>,
    ledger: &mut DcLedger,
    commute_tol: f64,
) -> Result<Vec<GrantOutcome>> {
    let entries = schedule.entries();
    let mut outcomes: Vec<GrantOutcome> = Vec::new();
    let mut decided: BTreeSet<(usize, usize, String)> = BTreeSet::new();
    loop {
        let mut candidates = Vec::new();
        for (i, xy) in entries.iter().enumerate() {
            let xy_sys = [ledger.system_of(&xy.parties.0), ledger.system_of(&xy.parties.1)];
            for (j, zy) in entries.iter().enumerate() {
                if i == j {
                    continue;
                }
                let zy_sys = [ledger.system_of(&zy.parties.0), ledger.system_of(&zy.parties.1)];
                for (yi, y) in xy_sys.iter().enumerate() {
                    let Some(zi) = zy_sys.iter().position(|s| s == y) else {
                        continue;
                    };
                    let x = &xy_sys[1 - yi];
                    let z = &zy_sys[1 - zi];
                    if x == y || z == y || x == z {
                        continue;
                    }
                    if !ledger.has_dc(x, y, xy.end) || decided.contains(&(i, j, y.clone())) {
                        continue;
                    }
                    let y_factor = if yi == 0 { &xy.parties.0 } else { &xy.parties.1 };
                    candidates.push((xy.end, i, j, x.clone(), y.clone(), z.clone(), y_factor.clone()));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (time, i, j, x, y, z, y_factor) in candidates {
            decided.insert((i, j, y.clone()));
            let (xy, zy) = (&entries[i], &entries[j]);
            let reason = if !(xy.start < zy.start && zy.start < xy.end) {
                Some(format!(
                    "timing: {z} starts interacting with {y} at {} outside ({}, {})",
                    zy.start, xy.start, xy.end
                ))
            } else if !evidence.get(&i).is_some_and(ProcessClass::is_quasi_irreversible) {
                Some(format!("{y} is not quasi-irreversibly decohered by {x}"))
            } else {
                let residual = disturbance(xy, zy, &y_factor)?;
                (residual > commute_tol)
                    .then(|| format!("{z} disturbs {y}'s pointer (commutator residual {residual:.3e})"))
            };
            let granted = reason.is_none();
            if granted && !ledger.direct(&y, &z, time) {
                ledger.records.push(DcRecord {
                    holder: y.clone(),
                    target: z.clone(),
                    granted_at: time,
                    via: x.clone(),
                });
            }
            outcomes.push(GrantOutcome {
                grantor: x,
                holder: y,
                target: z,
                time,
                granted,
                reason,
            });
        }
    }
    outcomes.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(outcomes)
}

/// Relative commutator of the Z–Y coupling with the X–Y pointer on `y_factor`,
/// both lifted to the union of their factors.
fn disturbance(
    xy: &crate::decomodels::ScheduleEntry,
    zy: &crate::decomodels::ScheduleEntry,
    y_factor: &str,
) -> Result<f64> {
    let h = zy.local_hamiltonian()?;
    let pointer = xy.pointer_for(y_factor)?;
    let mut layout = h.layout().clone();
    if !layout.contains(y_factor) {
        layout = layout.concat(&SpaceLayout::single(y_factor, 2)?)?;
    }
    let h_full = embed(h.matrix(), &layout, &[&zy.parties.0, &zy.parties.1])?;
    let p_full = embed(pointer.matrix(), &layout, &[y_factor])?;
    Ok(commutator_residual(&h_full, &p_full))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminateOutcome {
    pub happened: bool,
    pub reason: Option<String>,
    pub state: StateVector,
    pub assignments: Vec<Assignment>,
    pub weights: Vec<f64>,
}

impl DeterminateOutcome {
    pub fn to_event(&self, holder: &str, target: &str, t: f64) -> Event {
        if self.happened {
            Event::new(EventKind::DeterminateValue, t, [holder, target])
                .with_values(self.assignments.clone())
                .with_weights(self.weights.clone())
        } else {
            Event::new(EventKind::NoEvent, t, [holder, target]).with_detail(self.reason.clone().unwrap_or_default())
        }
    }
}

/// A determinate-value event of `target` (measured through `m`, a factor of
/// the target) relative to `holder`.
///
/// Needs DC and quasi-irreversible evidence; otherwise nothing happens and
/// the state is returned unchanged. On success one outcome is Born-sampled,
/// the state is conditioned on it, holder and target get values at the
/// same time `t`, an SDI `holder → target` is added and the target becomes a
/// generator.
#[allow(clippy::too_many_arguments)]
pub fn endqt_determinate_event<R: Rng + ?Sized>(
    state: &StateVector,
    ledger: &DcLedger,
    holder: &str,
    target: &str,
    m: &Measurement,
    evidence: &ProcessClass,
    graph: &mut StructureGraph,
    t: f64,
    rng: &mut R,
) -> Result<DeterminateOutcome> {
    let refuse = |reason: String| DeterminateOutcome {
        happened: false,
        reason: Some(reason),
        state: state.clone(),
        assignments: Vec::new(),
        weights: Vec::new(),
    };
    if ledger.system_of(&m.system) != target {
        return Err(Error::invalid(format!("'{}' is not part of '{target}'", m.system)));
    }
    if !ledger.has_dc(holder, target, t) {
        return Ok(refuse(format!("{holder} has no DC concerning {target}")));
    }
    if !evidence.is_quasi_irreversible() {
        return Ok(refuse(format!("interaction of {holder} and {target} is reversible")));
    }
    let (i, probs, post) = measure(state, m, rng)?;
    let value = m.assignment(i);
    let record = Assignment {
        system: holder.to_string(),
        property: format!("record of {} {}", target, m.property),
        value: value.value,
        index: i,
    };
    let mut target_value = value;
    target_value.system = target.to_string();
    graph.add_interaction(holder, target, EdgeKind::Sdi, true, t)?;
    graph.mark_determinate(holder, t)?;
    graph.mark_determinate(target, t)?;
    graph.set_generator(target)?;
    Ok(DeterminateOutcome {
        happened: true,
        reason: None,
        state: post,
        assignments: vec![record, target_value],
        weights: probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomodels::ScheduleEntry;
    use crate::differentiation::{ProcessEvidence, ProcessKind};
    use crate::hilbert::linalg::c;
    use crate::hilbert::{Observable, Pauli};
    use crate::structures::{SystemNode, UdiPolicy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qi() -> ProcessClass {
        ProcessClass {
            kind: ProcessKind::QuasiIrreversible,
            evidence: ProcessEvidence {
                env_size: 10,
                recurrence_estimate: None,
                sustained_below_eps: 1.0,
            },
        }
    }

    fn chain_ledger() -> DcLedger {
        let mut l = DcLedger::default();
        l.add_initiator("S0", InitiatorKind::A);
        l.add_composite("S1", ["S1a", "S1b"]).unwrap();
        l
    }

    fn schedule(zy_start: f64, zy_tag: &str, zy_party: &str) -> InteractionSchedule {
        InteractionSchedule::new(vec![
            ScheduleEntry::new(0.0, 1.0, "S1a", "S0", "zx", std::f64::consts::FRAC_PI_4),
            ScheduleEntry::new(
                zy_start,
                zy_start + 1.0,
                "S2",
                zy_party,
                zy_tag,
                std::f64::consts::FRAC_PI_4,
            ),
        ])
        .unwrap()
    }

    fn evidence_all() -> BTreeMap<usize, ProcessClass> {
        [(0, qi()), (1, qi())].into_iter().collect()
    }

    #[test]
    fn overlapping_onset_grants_dc() {
        let mut l = chain_ledger();
        let out = endqt_grant_dc(&schedule(0.5, "zx", "S1b"), &evidence_all(), &mut l, 1e-6).unwrap();
        let g: Vec<_> = out.iter().filter(|o| o.granted).collect();
        assert_eq!(g.len(), 1);
        assert_eq!(
            (g[0].holder.as_str(), g[0].target.as_str(), g[0].time),
            ("S1", "S2", 1.0)
        );
        assert!(l.has_dc("S1", "S2", 1.0));
        assert!(!l.has_dc("S1", "S2", 0.9));
        l.audit().unwrap();
    }

    #[test]
    fn late_onset_is_refused_for_timing() {
        let mut l = chain_ledger();
        let out = endqt_grant_dc(&schedule(1.0, "zx", "S1b"), &evidence_all(), &mut l, 1e-6).unwrap();
        assert!(out.iter().all(|o| !o.granted));
        assert!(out[0].reason.as_deref().unwrap().starts_with("timing"));
        assert!(!l.has_dc("S1", "S2", 5.0));
    }

    #[test]
    fn disturbing_coupling_is_refused() {
        let mut l = chain_ledger();
        // X on S1a does not commute with the Z pointer the S0 interaction set up
        let out = endqt_grant_dc(&schedule(0.5, "zx", "S1a"), &evidence_all(), &mut l, 1e-6).unwrap();
        assert!(out.iter().all(|o| !o.granted));
        assert!(out[0].reason.as_deref().unwrap().contains("disturbs"));
    }

    #[test]
    fn reversible_xy_is_refused() {
        let mut l = chain_ledger();
        let ev: BTreeMap<usize, ProcessClass> = BTreeMap::new();
        let out = endqt_grant_dc(&schedule(0.5, "zx", "S1b"), &ev, &mut l, 1e-6).unwrap();
        assert!(out.iter().all(|o| !o.granted));
    }

    #[test]
    fn composite_aggregation() {
        let mut l = DcLedger::default();
        l.add_initiator("I", InitiatorKind::B);
        l.add_composite("H", ["h1", "h2"]).unwrap();
        l.add_composite("T", ["t1", "t2"]).unwrap();
        l.records.push(DcRecord {
            holder: "h1".into(),
            target: "T".into(),
            granted_at: 0.0,
            via: "I".into(),
        });
        assert!(!l.has_dc("H", "T", 1.0));
        l.records.push(DcRecord {
            holder: "h2".into(),
            target: "t1".into(),
            granted_at: 0.0,
            via: "I".into(),
        });
        assert!(!l.has_dc("H", "T", 1.0));
        l.records.push(DcRecord {
            holder: "h2".into(),
            target: "t2".into(),
            granted_at: 0.0,
            via: "I".into(),
        });
        assert!(l.has_dc("H", "T", 1.0));
    }

    #[test]
    fn audit_catches_orphan_records() {
        let mut l = DcLedger::default();
        l.records.push(DcRecord {
            holder: "Y".into(),
            target: "Z".into(),
            granted_at: 0.0,
            via: "X".into(),
        });
        assert!(l.audit().unwrap_err().is_integrity());
        let mut seeded = DcLedger::default();
        seeded.add_initiator("B0", InitiatorKind::B);
        seeded.seed("B0", "Q", 0.0).unwrap();
        seeded.audit().unwrap();
        assert!(seeded.has_dc("B0", "Q", 0.0) && !seeded.has_dc("B0", "R", 0.0));
        assert!(seeded.seed("Q", "B0", 0.0).is_err());
    }

    fn chain_state() -> StateVector {
        let plus = |l: &str| StateVector::single(l, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let zero = |l: &str| StateVector::single(l, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        zero("S0")
            .tensor(&plus("S1a"))
            .unwrap()
            .tensor(&zero("S1b"))
            .unwrap()
            .tensor(&plus("S2"))
            .unwrap()
    }

    fn chain_graph() -> StructureGraph {
        let mut g = StructureGraph::new(UdiPolicy::Detach);
        g.add_node(SystemNode::initiator("S0")).unwrap();
        g.add_node(SystemNode::non_generator("S1")).unwrap();
        g.add_node(SystemNode::non_generator("S2")).unwrap();
        g
    }

    #[test]
    fn determinate_events_grow_the_chain() {
        let mut l = chain_ledger();
        let sched = schedule(0.5, "zx", "S1b");
        endqt_grant_dc(&sched, &evidence_all(), &mut l, 1e-6).unwrap();
        let mut g = chain_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = crate::decomodels::evolve_between(&chain_state(), &sched, 0.0, 1.0).unwrap();
        let m1 = Measurement::new("spin-z", Observable::pauli("S1a", Pauli::Z).unwrap()).unwrap();
        let e1 = endqt_determinate_event(&st, &l, "S0", "S1", &m1, &qi(), &mut g, 1.0, &mut rng).unwrap();
        assert!(e1.happened);
        assert!((e1.weights[0] - 0.5).abs() < 1e-9);
        let st = crate::decomodels::evolve_between(&e1.state, &sched, 1.0, 1.5).unwrap();
        let m2 = Measurement::new("spin-z", Observable::pauli("S2", Pauli::Z).unwrap()).unwrap();
        let e2 = endqt_determinate_event(&st, &l, "S1", "S2", &m2, &qi(), &mut g, 1.5, &mut rng).unwrap();
        assert!(e2.happened);
        assert!(g.has_edge("S0", "S1", EdgeKind::Sdi) && g.has_edge("S1", "S2", EdgeKind::Sdi));
        assert!(g.node("S2").unwrap().generator);
        assert_eq!(g.components().unwrap().len(), 1);
    }

    #[test]
    fn no_dc_means_no_event() {
        let l = chain_ledger();
        let mut g = chain_graph();
        let before = g.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = chain_state();
        let m2 = Measurement::new("spin-z", Observable::pauli("S2", Pauli::Z).unwrap()).unwrap();
        let e = endqt_determinate_event(&st, &l, "S1", "S2", &m2, &qi(), &mut g, 1.5, &mut rng).unwrap();
        assert!(!e.happened);
        assert_eq!(e.state, st);
        assert_eq!(g, before);
        assert!(e.assignments.is_empty());
    }
}
