//! Classical and quantum causal models on the Bell topology.
//!
//! Classical models are DAGs with conditional probability tables over finite
//! variables. Quantum models hold a bipartite source state whose halves are
//! carried to the two wings by channels and then measured. CHSH uses the
//! `±1` outcome encoding given by each quantum model's `signs` (first
//! outcome `+1` by default).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventKind, EventLog};
use crate::hilbert::linalg::{c, kron};
use crate::hilbert::{apply_channel, CMatrix, Channel, DensityOperator, Observable, Povm, SpaceLayout, StateVector};
use crate::structures::{EdgeKind, StructureGraph, SystemNode, UdiPolicy};
use crate::tol;

/// Labels of the source halves travelling to each wing.
pub const WING_A: &str = "A";
pub const WING_B: &str = "B";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dag {
    nodes: Vec<String>,
    parents: BTreeMap<String, Vec<String>>,
    order: Vec<String>,
}

impl Dag {
    /// Parents are kept in node declaration order. Cycles, unknown
    /// endpoints and duplicate nodes are rejected.
    pub fn new<'a>(nodes: impl IntoIterator<Item = &'a str>, edges: &[(&str, &str)]) -> Result<Self> {
        let nodes: Vec<String> = nodes.into_iter().map(str::to_string).collect();
        let unique: BTreeSet<&String> = nodes.iter().collect();
        if unique.len() != nodes.len() {
            return Err(Error::invalid("duplicate DAG node"));
        }
        let pos = |n: &str| nodes.iter().position(|m| m == n);
        let mut parents: BTreeMap<String, Vec<String>> = nodes.iter().map(|n| (n.clone(), Vec::new())).collect();
        for (from, to) in edges {
            if pos(from).is_none() || pos(to).is_none() {
                return Err(Error::invalid(format!("edge {from} -> {to} names an unknown node")));
            }
            let ps = parents.get_mut(*to).expect("checked above");
            if !ps.iter().any(|p| p == from) {
                ps.push(from.to_string());
            }
        }
        for ps in parents.values_mut() {
            ps.sort_by_key(|p| pos(p));
        }
        let mut indegree: BTreeMap<&str, usize> = parents.iter().map(|(n, ps)| (n.as_str(), ps.len())).collect();
        let mut queue: VecDeque<&str> = nodes.iter().map(String::as_str).filter(|n| indegree[n] == 0).collect();
        let mut order = Vec::with_capacity(nodes.len());
        while let Some(n) = queue.pop_front() {
            order.push(n.to_string());
            for m in &nodes {
                if parents[m].iter().any(|p| p == n) {
                    let d = indegree.get_mut(m.as_str()).expect("node present");
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(m);
                    }
                }
            }
        }
        if order.len() != nodes.len() {
            return Err(Error::invalid("graph has a directed cycle"));
        }
        Ok(Self { nodes, parents, order })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn parents(&self, node: &str) -> &[String] {
        self.parents.get(node).map_or(&[], Vec::as_slice)
    }

    pub fn topological_order(&self) -> &[String] {
        &self.order
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.parents(to).iter().any(|p| p == from)
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.nodes
            .iter()
            .flat_map(|n| self.parents(n).iter().map(move |p| (p.clone(), n.clone())))
            .collect()
    }
}

/// Joint distribution over finite variables, row-major with the first
/// variable most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    vars: Vec<String>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(vars: Vec<String>, cards: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if vars.len() != cards.len() || cards.contains(&0) {
            return Err(Error::invalid("each variable needs a positive cardinality"));
        }
        let size: usize = cards.iter().product();
        if probs.len() != size {
            return Err(Error::invalid(format!(
                "table has {} cells, expected {size}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > tol::COMPLETENESS {
            return Err(Error::invalid(format!("table sums to {total}")));
        }
        Ok(Self { vars, cards, probs })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn assignment(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        for (slot, card) in out.iter_mut().zip(&self.cards).rev() {
            *slot = index % card;
            index /= card;
        }
        out
    }

    /// Marginal over the variables at `positions`, indexed row-major in
    /// that order.
    fn marginal(&self, positions: &[usize]) -> Vec<f64> {
        let size: usize = positions.iter().map(|&p| self.cards[p]).product();
        let mut out = vec![0.0; size];
        for (i, p) in self.probs.iter().enumerate() {
            let a = self.assignment(i);
            out[mixed_index(positions.iter().map(|&q| (a[q], self.cards[q])))] += p;
        }
        out
    }
}

fn mixed_index(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (d, card)| acc * card + d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCausalModel {
    dag: Dag,
    cards: BTreeMap<String, usize>,
    /// One row per parent assignment (row-major over the parents), each a
    /// distribution over the node's outcomes.
    cpts: BTreeMap<String, Vec<Vec<f64>>>,
}

impl ClassicalCausalModel {
    pub fn new(dag: Dag, cards: BTreeMap<String, usize>, cpts: BTreeMap<String, Vec<Vec<f64>>>) -> Result<Self> {
        for n in dag.nodes() {
            let card = *cards
                .get(n)
                .ok_or_else(|| Error::invalid(format!("no cardinality for '{n}'")))?;
            if card == 0 {
                return Err(Error::invalid(format!("'{n}' has cardinality 0")));
            }
            let rows: usize = dag.parents(n).iter().map(|p| cards[p]).product();
            let cpt = cpts
                .get(n)
                .ok_or_else(|| Error::invalid(format!("no table for '{n}'")))?;
            if cpt.len() != rows || cpt.iter().any(|r| r.len() != card) {
                return Err(Error::invalid(format!("table of '{n}' must be {rows} x {card}")));
            }
            for row in cpt {
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > tol::COMPLETENESS || row.iter().any(|p| *p < 0.0) {
                    return Err(Error::invalid(format!("a row of '{n}' sums to {s}")));
                }
            }
        }
        if cards.len() != dag.nodes().len() || cpts.len() != dag.nodes().len() {
            return Err(Error::invalid("tables name variables outside the DAG"));
        }
        Ok(Self { dag, cards, cpts })
    }

    /// Random tables with entries bounded away from zero.
    pub fn random<R: Rng + ?Sized>(dag: Dag, cards: BTreeMap<String, usize>, rng: &mut R) -> Result<Self> {
        let mut cpts = BTreeMap::new();
        for n in dag.nodes() {
            let card = *cards
                .get(n)
                .ok_or_else(|| Error::invalid(format!("no cardinality for '{n}'")))?;
            let rows: usize = dag
                .parents(n)
                .iter()
                .map(|p| cards.get(p).copied().unwrap_or(1))
                .product();
            let table = (0..rows)
                .map(|_| {
                    let raw: Vec<f64> = (0..card).map(|_| rng.random_range(0.1..1.0)).collect();
                    let s: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / s).collect()
                })
                .collect();
            cpts.insert(n.clone(), table);
        }
        Self::new(dag, cards, cpts)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn card(&self, node: &str) -> Option<usize> {
        self.cards.get(node).copied()
    }

    /// The Markov product `Π P(x_j | pa_j)` over all assignments.
    pub fn joint(&self) -> JointTable {
        let vars = self.dag.nodes().to_vec();
        let cards: Vec<usize> = vars.iter().map(|v| self.cards[v]).collect();
        let size: usize = cards.iter().product();
        let mut shell = JointTable {
            vars: vars.clone(),
            cards: cards.clone(),
            probs: vec![0.0; size],
        };
        for i in 0..size {
            let a = shell.assignment(i);
            shell.probs[i] = vars
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let row = mixed_index(self.dag.parents(v).iter().map(|p| {
                        let q = vars.iter().position(|x| x == p).expect("parent is a node");
                        (a[q], cards[q])
                    }));
                    self.cpts[v][row][a[j]]
                })
                .product();
        }
        shell
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmcReport {
    pub markov: bool,
    pub max_violation: f64,
}

/// Whether `joint` factorizes over the model's DAG, using the joint's own
/// conditionals. Conditionals on zero-probability parent assignments are
/// undefined and contribute no deviation.
pub fn cmc_check(model: &ClassicalCausalModel, joint: &JointTable) -> Result<CmcReport> {
    let dag = model.dag();
    if joint.vars() != dag.nodes() {
        return Err(Error::invalid("joint variables must match the DAG nodes in order"));
    }
    for (v, card) in joint.vars().iter().zip(joint.cards()) {
        if model.card(v) != Some(*card) {
            return Err(Error::invalid(format!("cardinality of '{v}' differs from the model")));
        }
    }
    let vars = joint.vars();
    let family: Vec<(Vec<usize>, Vec<usize>)> = vars
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let pa: Vec<usize> = dag
                .parents(v)
                .iter()
                .map(|p| vars.iter().position(|x| x == p).expect("parent is a node"))
                .collect();
            let mut fam = pa.clone();
            fam.push(j);
            (pa, fam)
        })
        .collect();
    let margins: Vec<(Vec<f64>, Vec<f64>)> = family
        .iter()
        .map(|(pa, fam)| (joint.marginal(pa), joint.marginal(fam)))
        .collect();
    let mut worst: f64 = 0.0;
    for (i, p) in joint.probs().iter().enumerate() {
        let a = joint.assignment(i);
        let mut product = 1.0;
        let mut defined = true;
        for ((pa, fam), (m_pa, m_fam)) in family.iter().zip(&margins) {
            let den = m_pa[mixed_index(pa.iter().map(|&q| (a[q], joint.cards()[q])))];
            if den <= 0.0 {
                defined = false;
                break;
            }
            product *= m_fam[mixed_index(fam.iter().map(|&q| (a[q], joint.cards()[q])))] / den;
        }
        if defined {
            worst = worst.max((p - product).abs());
        }
    }
    Ok(CmcReport {
        markov: worst <= tol::COMPLETENESS,
        max_violation: worst,
    })
}

/// `P(a, b | x, y, λ)`, indexed `[x][y][λ][a][b]` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    pub outcomes: (usize, usize),
    pub settings: (usize, usize),
    pub hidden: usize,
    probs: Vec<f64>,
}

impl ResponseTable {
    pub fn new(outcomes: (usize, usize), settings: (usize, usize), hidden: usize, probs: Vec<f64>) -> Result<Self> {
        let slice = outcomes.0 * outcomes.1;
        let slices = settings.0 * settings.1 * hidden;
        if slice == 0 || slices == 0 || probs.len() != slice * slices {
            return Err(Error::invalid("response table shape does not match its dimensions"));
        }
        for (k, chunk) in probs.chunks(slice).enumerate() {
            let s: f64 = chunk.iter().sum();
            if (s - 1.0).abs() > tol::COMPLETENESS || chunk.iter().any(|p| *p < 0.0) {
                return Err(Error::invalid(format!("slice {k} sums to {s}")));
            }
        }
        Ok(Self {
            outcomes,
            settings,
            hidden,
            probs,
        })
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize, l: usize) -> f64 {
        let (na, nb) = self.outcomes;
        self.probs[(((x * self.settings.1 + y) * self.hidden + l) * na + a) * nb + b]
    }

    fn marginals(&self, x: usize, y: usize, l: usize) -> (Vec<f64>, Vec<f64>) {
        let (na, nb) = self.outcomes;
        let mut pa = vec![0.0; na];
        let mut pb = vec![0.0; nb];
        for a in 0..na {
            for b in 0..nb {
                let p = self.get(a, b, x, y, l);
                pa[a] += p;
                pb[b] += p;
            }
        }
        (pa, pb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizabilityReport {
    pub holds: bool,
    pub max_violation: f64,
}

/// Checks `P(ab|xyλ) = P(a|xλ) P(b|yλ)`: each slice must be the product of
/// its marginals, and each wing's marginal must not depend on the other
/// wing's setting.
pub fn factorizability_check(table: &ResponseTable) -> FactorizabilityReport {
    let (na, nb) = table.outcomes;
    let (nx, ny) = table.settings;
    let mut worst: f64 = 0.0;
    for l in 0..table.hidden {
        for x in 0..nx {
            for y in 0..ny {
                let (pa, pb) = table.marginals(x, y, l);
                for a in 0..na {
                    for b in 0..nb {
                        worst = worst.max((table.get(a, b, x, y, l) - pa[a] * pb[b]).abs());
                    }
                }
                let (pa0, _) = table.marginals(x, 0, l);
                let (_, pb0) = table.marginals(0, y, l);
                for a in 0..na {
                    worst = worst.max((pa[a] - pa0[a]).abs());
                }
                for b in 0..nb {
                    worst = worst.max((pb[b] - pb0[b]).abs());
                }
            }
        }
    }
    FactorizabilityReport {
        holds: worst <= tol::COMPLETENESS,
        max_violation: worst,
    }
}

/// Observed statistics `P(x, y | s, t)`, indexed `[s][t][x][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellTable {
    pub settings: (usize, usize),
    pub outcomes: (usize, usize),
    probs: Vec<f64>,
}

impl BellTable {
    pub fn get(&self, x: usize, y: usize, s: usize, t: usize) -> f64 {
        let (na, nb) = self.outcomes;
        self.probs[((s * self.settings.1 + t) * na + x) * nb + y]
    }

    /// `E(s, t) = Σ sign(x) sign(y) P(x, y | s, t)`.
    pub fn correlator(&self, s: usize, t: usize, signs: [f64; 2]) -> Result<f64> {
        if self.outcomes != (2, 2) {
            return Err(Error::invalid("correlators need binary outcomes"));
        }
        let mut e = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                e += signs[x] * signs[y] * self.get(x, y, s, t);
            }
        }
        Ok(e)
    }

    pub fn marginal_a(&self, s: usize, t: usize) -> Vec<f64> {
        (0..self.outcomes.0)
            .map(|x| (0..self.outcomes.1).map(|y| self.get(x, y, s, t)).sum())
            .collect()
    }

    pub fn marginal_b(&self, s: usize, t: usize) -> Vec<f64> {
        (0..self.outcomes.1)
            .map(|y| (0..self.outcomes.0).map(|x| self.get(x, y, s, t)).sum())
            .collect()
    }

    /// The same statistics as a response table with a single hidden value.
    pub fn as_response(&self) -> Result<ResponseTable> {
        ResponseTable::new(self.outcomes, self.settings, 1, self.probs.clone())
    }

    /// Columns `s,t,x,y,p`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,t,x,y,p\n");
        let (ns, nt) = self.settings;
        let (na, nb) = self.outcomes;
        for s in 0..ns {
            for t in 0..nt {
                for x in 0..na {
                    for y in 0..nb {
                        let _ = writeln!(out, "{s},{t},{x},{y},{}", self.get(x, y, s, t));
                    }
                }
            }
        }
        out
    }
}

/// CHSH combination `E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)` of a 2×2
/// correlator table `e[s][t]`.
pub fn chsh_from_correlators(e: [[f64; 2]; 2]) -> f64 {
    e[0][0] - e[0][1] + e[1][0] + e[1][1]
}

#[derive(Debug, Clone)]
pub struct QuantumCausalModel {
    rho: DensityOperator,
    channel_a: Channel,
    channel_b: Channel,
    povm_a: Vec<Povm>,
    povm_b: Vec<Povm>,
    signs: [f64; 2],
    delivered: DensityOperator,
}

impl QuantumCausalModel {
    /// `rho` must have exactly the factors [`WING_A`] and [`WING_B`]; each
    /// entry of `povm_a`/`povm_b` is the measurement for one setting.
    pub fn new(
        rho: DensityOperator,
        channel_a: Channel,
        channel_b: Channel,
        povm_a: Vec<Povm>,
        povm_b: Vec<Povm>,
    ) -> Result<Self> {
        let labels: Vec<&str> = rho.layout().labels().collect();
        if labels != [WING_A, WING_B] {
            return Err(Error::invalid(format!(
                "source state must have factors {WING_A}, {WING_B}"
            )));
        }
        if povm_a.is_empty() || povm_b.is_empty() {
            return Err(Error::invalid("each wing needs at least one setting"));
        }
        let da = rho.layout().factor_dim(WING_A).expect("checked");
        let db = rho.layout().factor_dim(WING_B).expect("checked");
        if povm_a.iter().any(|p| p.dim() != da) || povm_b.iter().any(|p| p.dim() != db) {
            return Err(Error::invalid("POVM dimension does not match its wing"));
        }
        let delivered = apply_channel(&apply_channel(&rho, &channel_a, &[WING_A])?, &channel_b, &[WING_B])?;
        Ok(Self {
            rho,
            channel_a,
            channel_b,
            povm_a,
            povm_b,
            signs: [1.0, -1.0],
            delivered,
        })
    }

    /// Two-qubit source measured along spin angles (radians, x–z plane)
    /// with identity channels.
    pub fn spin_bell(rho: DensityOperator, angles_a: &[f64], angles_b: &[f64]) -> Result<Self> {
        let povms = |label: &str, angles: &[f64]| -> Result<Vec<Povm>> {
            angles
                .iter()
                .map(|&th| Povm::projective(&Observable::spin_along(label, th)?))
                .collect()
        };
        Self::new(
            rho,
            Channel::identity(2),
            Channel::identity(2),
            povms(WING_A, angles_a)?,
            povms(WING_B, angles_b)?,
        )
    }

    /// The singlet `(|01⟩ − |10⟩)/√2` measured along the given angles.
    pub fn singlet(angles_a: &[f64], angles_b: &[f64]) -> Result<Self> {
        Self::spin_bell(singlet_state(-1.0)?.to_density(), angles_a, angles_b)
    }

    pub fn with_signs(mut self, signs: [f64; 2]) -> Self {
        self.signs = signs;
        self
    }

    pub fn signs(&self) -> [f64; 2] {
        self.signs
    }

    pub fn source(&self) -> &DensityOperator {
        &self.rho
    }

    pub fn channels(&self) -> (&Channel, &Channel) {
        (&self.channel_a, &self.channel_b)
    }

    pub fn settings(&self) -> (usize, usize) {
        (self.povm_a.len(), self.povm_b.len())
    }

    pub fn outcomes(&self, s: usize, t: usize) -> Option<(usize, usize)> {
        Some((self.povm_a.get(s)?.len(), self.povm_b.get(t)?.len()))
    }
}

/// `(|01⟩ + phase·|10⟩)/√2` on factors [`WING_A`], [`WING_B`]; `phase = −1`
/// is the singlet.
pub fn singlet_state(phase: f64) -> Result<StateVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_slice(
        &[c(0.0, 0.0), c(s, 0.0), c(phase * s, 0.0), c(0.0, 0.0)],
        SpaceLayout::new([(WING_A, 2), (WING_B, 2)])?,
    )
}

/// `P(x, y | s, t) = tr[(E_A^{x|s} ⊗ E_B^{y|t}) (Λ_A ⊗ Λ_B)(ρ)]`.
pub fn qcm_probability(m: &QuantumCausalModel, x: usize, y: usize, s: usize, t: usize) -> Result<f64> {
    let (pa, pb) = match (m.povm_a.get(s), m.povm_b.get(t)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid(format!("setting pair ({s}, {t}) out of range"))),
    };
    let (ea, eb) = match (pa.effect(x), pb.effect(y)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid(format!("outcome pair ({x}, {y}) out of range"))),
    };
    Ok(trace_product(&kron(ea, eb), m.delivered.matrix()).clamp(0.0, 1.0))
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.transpose().component_mul(b).sum().re
}

/// Every `P(x, y | s, t)`, checking each setting pair sums to one.
pub fn qcm_table(m: &QuantumCausalModel) -> Result<BellTable> {
    let (ns, nt) = m.settings();
    let (na, nb) = m.outcomes(0, 0).expect("at least one setting");
    if (0..ns).any(|s| (0..nt).any(|t| m.outcomes(s, t) != Some((na, nb)))) {
        return Err(Error::invalid("all settings must have the same outcome count"));
    }
    let mut probs = Vec::with_capacity(ns * nt * na * nb);
    for s in 0..ns {
        for t in 0..nt {
            let start = probs.len();
            for x in 0..na {
                for y in 0..nb {
                    probs.push(qcm_probability(m, x, y, s, t)?);
                }
            }
            let total: f64 = probs[start..].iter().sum();
            if (total - 1.0).abs() > tol::COMPLETENESS {
                return Err(Error::integrity(format!("P(x,y|{s},{t}) sums to {total}")));
            }
        }
    }
    Ok(BellTable {
        settings: (ns, nt),
        outcomes: (na, nb),
        probs,
    })
}

pub fn qcm_correlator(m: &QuantumCausalModel, s: usize, t: usize) -> Result<f64> {
    if m.outcomes(s, t) != Some((2, 2)) {
        return Err(Error::invalid("correlators need binary outcomes"));
    }
    let mut e = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            e += m.signs[x] * m.signs[y] * qcm_probability(m, x, y, s, t)?;
        }
    }
    Ok(e)
}

/// CHSH value with settings `a, a′` on Alice's side and `b, b′` on Bob's,
/// given as setting indices.
pub fn chsh(m: &QuantumCausalModel, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    let e = |s, t| qcm_correlator(m, s, t);
    Ok(chsh_from_correlators([
        [e(a.0, b.0)?, e(a.0, b.1)?],
        [e(a.1, b.0)?, e(a.1, b.1)?],
    ]))
}

/// CHSH of the singlet at angles `(a, a′, b, b′)` in radians.
pub fn singlet_chsh(angles: [f64; 4]) -> Result<f64> {
    let m = QuantumCausalModel::singlet(&angles[..2], &angles[2..])?;
    chsh(&m, (0, 1), (0, 1))
}

/// A deterministic local strategy: each wing's `±1` response per setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub a: [i8; 2],
    pub b: [i8; 2],
}

impl DeterministicStrategy {
    pub fn chsh(&self) -> f64 {
        let e = |s: usize, t: usize| f64::from(self.a[s] * self.b[t]);
        chsh_from_correlators([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Response table with outcome 0 for `+1`.
    pub fn response_table(&self) -> ResponseTable {
        let idx = |v: i8| usize::from(v < 0);
        let mut probs = vec![0.0; 16];
        for x in 0..2 {
            for y in 0..2 {
                probs[(x * 2 + y) * 4 + idx(self.a[x]) * 2 + idx(self.b[y])] = 1.0;
            }
        }
        ResponseTable::new((2, 2), (2, 2), 1, probs).expect("deterministic slices are normalized")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalBound {
    pub strategies: Vec<DeterministicStrategy>,
    pub max_abs: f64,
}

/// Enumerates all 16 deterministic strategy pairs and returns the largest
/// `|S|`. Any factorizable model is a mixture of these, so by convexity its
/// `|S|` is bounded by the same value.
pub fn classical_chsh_bound() -> ClassicalBound {
    let signs = [1i8, -1];
    let responses: Vec<[i8; 2]> = signs.iter().flat_map(|&u| signs.iter().map(move |&v| [u, v])).collect();
    let strategies: Vec<DeterministicStrategy> = responses
        .iter()
        .flat_map(|&a| responses.iter().map(move |&b| DeterministicStrategy { a, b }))
        .collect();
    let max_abs = strategies.iter().map(|s| s.chsh().abs()).fold(0.0, f64::max);
    ClassicalBound { strategies, max_abs }
}

/// A finite hidden variable `λ` with local stochastic responses: the
/// factorizable models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalHiddenVariableModel {
    pub weights: Vec<f64>,
    /// `P(a = +1 | x, λ)`, indexed `[λ][x]`.
    pub plus_a: Vec<[f64; 2]>,
    /// `P(b = +1 | y, λ)`, indexed `[λ][y]`.
    pub plus_b: Vec<[f64; 2]>,
}

impl LocalHiddenVariableModel {
    pub fn random<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let raw: Vec<f64> = (0..hidden).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let mut draw = || [rng.random::<f64>(), rng.random::<f64>()];
        let plus_a = (0..hidden).map(|_| draw()).collect();
        let plus_b = (0..hidden).map(|_| draw()).collect();
        Self {
            weights: raw.into_iter().map(|w| w / total).collect(),
            plus_a,
            plus_b,
        }
    }

    pub fn response_table(&self) -> Result<ResponseTable> {
        let nl = self.weights.len();
        let mut probs = Vec::with_capacity(16 * nl);
        for x in 0..2 {
            for y in 0..2 {
                for l in 0..nl {
                    let pa = [self.plus_a[l][x], 1.0 - self.plus_a[l][x]];
                    let pb = [self.plus_b[l][y], 1.0 - self.plus_b[l][y]];
                    for a in pa {
                        for b in pb {
                            probs.push(a * b);
                        }
                    }
                }
            }
        }
        ResponseTable::new((2, 2), (2, 2), nl, probs)
    }

    /// Observed statistics after averaging over `λ`.
    pub fn observed(&self) -> Result<BellTable> {
        let r = self.response_table()?;
        let mut probs = Vec::with_capacity(16);
        for s in 0..2 {
            for t in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        probs.push((0..r.hidden).map(|l| self.weights[l] * r.get(x, y, s, t, l)).sum());
                    }
                }
            }
        }
        Ok(BellTable {
            settings: (2, 2),
            outcomes: (2, 2),
            probs,
        })
    }

    pub fn chsh(&self) -> Result<f64> {
        let t = self.observed()?;
        let e = |s, u| t.correlator(s, u, [1.0, -1.0]);
        Ok(chsh_from_correlators([[e(0, 0)?, e(0, 1)?], [e(1, 0)?, e(1, 1)?]]))
    }
}

/// Detail string marking the source's emission in a Bell run's event log.
pub const EMISSION: &str = "emission";

/// Rebuilds the causal structure of an EnDQT Bell run from its event log.
///
/// The emission makes the source node a common cause of both halves through
/// directed unstable edges, which stay indeterminate (grey). Each
/// determinate-value event adds a stable edge from the measuring holder to
/// the measured half; incoming unstable edges are then retired, so a measured
/// wing's path from the source is drawn grey while the chain is black.
pub fn build_endqt_dag(log: &EventLog) -> Result<StructureGraph> {
    let foreign = [
        EventKind::Collapse,
        EventKind::Branch,
        EventKind::RelativeFact,
        EventKind::Destruction,
    ];
    if let Some(e) = log.events().iter().find(|e| foreign.contains(&e.kind)) {
        return Err(Error::invalid(format!(
            "{:?} events do not belong to an EnDQT log",
            e.kind
        )));
    }
    let emissions: Vec<_> = log
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Interaction && e.detail.as_deref() == Some(EMISSION))
        .collect();
    if emissions.is_empty() {
        return Err(Error::invalid("log has no source emission"));
    }
    let mut graph = StructureGraph::new(UdiPolicy::Detach);
    let ensure = |g: &mut StructureGraph, id: &str, holder: bool| -> Result<()> {
        if !g.contains(id) {
            g.add_node(if holder {
                SystemNode::initiator(id)
            } else {
                SystemNode::non_generator(id)
            })?;
        }
        Ok(())
    };
    for e in log.events() {
        match e.kind {
            EventKind::Interaction if e.detail.as_deref() == Some(EMISSION) => {
                let (source, halves) = e
                    .systems
                    .split_first()
                    .ok_or_else(|| Error::invalid("emission names no systems"))?;
                ensure(&mut graph, source, false)?;
                for h in halves {
                    ensure(&mut graph, h, false)?;
                    graph.add_interaction(source, h, EdgeKind::Udi, true, e.time)?;
                }
            }
            EventKind::DeterminateValue => {
                let [holder, target] = e.systems.as_slice() else {
                    return Err(Error::invalid("determinate-value event must name holder and target"));
                };
                ensure(&mut graph, holder, true)?;
                ensure(&mut graph, target, false)?;
                graph.add_interaction(holder, target, EdgeKind::Sdi, true, e.time)?;
                graph.mark_determinate(target, e.time)?;
            }
            _ => {}
        }
    }
    Ok(graph)
}
