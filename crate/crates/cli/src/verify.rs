//! Invariant suites runnable from the command line.
//!
//! Each suite recomputes a family of checks from scratch with fixed seeds
//! and reports every check, passing or not.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use determinacy::causal::{
    classical_chsh_bound, factorizability_check, qcm_correlator, singlet_chsh, LocalHiddenVariableModel,
    QuantumCausalModel,
};
use determinacy::decomodels::{spin_env_evolve, SpinEnvironment};
use determinacy::differentiation::{
    degree_of_differentiation, environment_overlaps, ProcessClass, ProcessEvidence, ProcessKind,
};
use determinacy::exec::trial_rng;
use determinacy::hilbert::linalg::c;
use determinacy::hilbert::{DensityOperator, Observable, Pauli, SpaceLayout, StateVector, C64};
use determinacy::scenarios::{run, weak_sweep, EprBellParams, Scenario, SdcChainParams, SternGerlachParams};
use determinacy::stats::chi_square_p_value;
use determinacy::structures::{EdgeKind, StructureGraph, SystemNode, UdiPolicy};
use determinacy::theories::{
    grw_step, mwi_branch, BranchBook, EnDqtParams, GrwParams, Measurement, MwiVariant, RelationalVariant, TheoryEngine,
};
use determinacy::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const SUITES: [&str; 9] = [
    "differentiation",
    "dephasing",
    "grw",
    "bell",
    "sdc",
    "mwi",
    "weak",
    "structures",
    "determinism",
];

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            checks: Vec::new(),
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("suite,check,passed,detail\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{},{},\"{}\"\n",
                self.suite,
                c.name,
                c.passed,
                c.detail.replace('"', "'").replace('\n', " ")
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "suite": self.suite,
            "passed": self.passed(),
            "checks": self.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        })
    }
}

/// `None` for an unknown suite name.
pub fn run_suite(name: &str) -> Option<Result<SuiteReport>> {
    Some(match name {
        "differentiation" => differentiation(),
        "dephasing" => dephasing(),
        "grw" => grw(),
        "bell" => bell(),
        "mwi" => mwi(),
        "sdc" => sdc(),
        "weak" => weak(),
        "structures" => structures(),
        "determinism" => determinism(),
        _ => return None,
    })
}

fn differentiation() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("differentiation");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in 2..=8 {
        let layout = SpaceLayout::single("S", d)?;
        let pure = determinacy::hilbert::random::random_state(&layout, &mut rng);
        let p = degree_of_differentiation(&pure.to_density())?;
        let m = degree_of_differentiation(&DensityOperator::maximally_mixed(layout))?;
        r.check(format!("pure d={d}"), p.abs() < 1e-9, format!("D* = {p:e}"));
        r.check(
            format!("maximally mixed d={d}"),
            (m - 1.0).abs() < 1e-9,
            format!("D* = {m}"),
        );
    }
    Ok(r)
}

fn dephasing() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("dephasing");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let system = StateVector::single("S", &[c(h, 0.0), c(h, 0.0)])?;
    let pointer = Observable::pauli("S", Pauli::Z)?;
    for n in 1..=10 {
        let env = SpinEnvironment::random(n, &mut rng)?;
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            let t = 2.0 * k as f64 / 99.0;
            let st = spin_env_evolve(&system, &env, t)?;
            let sim = environment_overlaps(&st, "S", &pointer, t)?.get(0, 1).norm();
            let oracle: f64 = env
                .couplings()
                .iter()
                .map(|g| (2.0 * g * t).cos())
                .product::<f64>()
                .abs();
            worst = worst.max((sim - oracle).abs());
        }
        r.check(format!("n={n}"), worst < 1e-9, format!("max deviation {worst:e}"));
    }
    Ok(r)
}

/// Three independent three-site generators over ten steps, 10^4 trials.
fn grw() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("grw");
    let born = [0.5, 0.3, 0.2];
    let amps: Vec<C64> = born.iter().map(|p: &f64| c(p.sqrt(), 0.0)).collect();
    let one = |l: &str| StateVector::single(l, &amps);
    let state = one("x")?.tensor(&one("y")?)?.tensor(&one("z")?)?;
    let params = GrwParams::new(0.5, 0.25)?;
    let (trials, steps, dt) = (10_000u64, 10, 0.1);
    let (mut hits, mut centers) = (0u64, [0u64; 3]);
    for trial in 0..trials {
        let mut rng = trial_rng(5, trial);
        let mut s = state.clone();
        let mut seen = [false; 3];
        for k in 0..steps {
            let (next, ev) = grw_step(&s, &["x", "y", "z"], &params, k as f64 * dt, dt, None, &mut rng)?;
            for e in &ev {
                let g = ["x", "y", "z"]
                    .iter()
                    .position(|l| *l == e.generator)
                    .expect("known generator");
                if !seen[g] {
                    seen[g] = true;
                    centers[e.center] += 1;
                }
            }
            hits += ev.len() as u64;
            s = next;
        }
    }
    let expected = 0.5 * 3.0 * steps as f64 * dt;
    let mean = hits as f64 / trials as f64;
    let se = (expected / trials as f64).sqrt();
    r.check(
        "collapse count",
        (mean - expected).abs() < 3.0 * se,
        format!("mean {mean}, expected {expected}, se {se}"),
    );
    let p = chi_square_p_value(&centers, &born);
    r.check(
        "first centers follow Born weights",
        p > 0.01,
        format!("{centers:?}, p = {p}"),
    );
    Ok(r)
}

/// Branching on the singlet after Bob's detector decoheres B.
fn mwi() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("mwi");
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let st = StateVector::from_slice(
        &[c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)],
        SpaceLayout::new([("A", 2), ("B", 2)])?,
    )?;
    let mut g = StructureGraph::default();
    for id in ["A", "B", "Alice", "Bob"] {
        g.add_node(SystemNode::generator(id))?;
    }
    g.add_interaction("A", "B", EdgeKind::Udi, false, 0.0)?;
    let ev = ProcessClass {
        kind: ProcessKind::QuasiIrreversible,
        evidence: ProcessEvidence {
            env_size: 1000,
            recurrence_estimate: None,
            sustained_below_eps: 1.0,
        },
    };
    let z = |l: &str| Measurement::new("spin-z", Observable::pauli(l, Pauli::Z)?);
    let key = |l: &str| (l.to_string(), "spin-z".to_string());

    let ws = mwi_branch(&st, "Bob", &z("B")?, MwiVariant::QuasiLocal, &g, &ev, 1.0)?;
    let anti = ws
        .worlds()
        .iter()
        .all(|w| matches!((w.values.get(&key("A")), w.values.get(&key("B"))), (Some(a), Some(b)) if *a == -*b));
    r.check(
        "quasi-local: two anticorrelated worlds",
        ws.len() == 2 && anti,
        format!("{} worlds", ws.len()),
    );

    let before = st.reduced(&["A"])?;
    let bob = mwi_branch(&st, "Bob", &z("B")?, MwiVariant::Local, &g, &ev, 1.0)?;
    let alice = mwi_branch(&st, "Alice", &z("A")?, MwiVariant::Local, &g, &ev, 2.0)?;
    let mut worst: f64 = 0.0;
    for w in bob.worlds() {
        worst = worst.max(w.remote["A"].max_deviation(&before)?);
    }
    r.check(
        "local: remote reduced state untouched",
        worst < 1e-10,
        format!("max deviation {worst:e}"),
    );
    let mut book = BranchBook::default();
    book.record("Bob", &z("B")?, &bob);
    book.record("Alice", &z("A")?, &alice);
    r.check(
        "local: four world-pairs before meeting",
        book.pairs().len() == 4,
        format!("{:?}", book.pairs()),
    );
    Ok(r)
}

fn bell() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("bell");
    let angles: Vec<f64> = (0..16).map(|k| k as f64 * PI / 8.0).collect();
    let m = QuantumCausalModel::singlet(&angles, &angles)?;
    let mut worst: f64 = 0.0;
    for s in 0..16 {
        for t in 0..16 {
            let e = qcm_correlator(&m, s, t)?;
            worst = worst.max((e + (angles[s] - angles[t]).cos()).abs());
        }
    }
    r.check("correlator grid", worst < 1e-10, format!("max deviation {worst:e}"));
    let s = singlet_chsh([0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4])?;
    r.check(
        "optimal CHSH",
        (s.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-9,
        format!("S = {s}"),
    );
    let bound = classical_chsh_bound();
    r.check(
        "classical bound",
        bound.max_abs == 2.0 && bound.strategies.len() == 16,
        format!("{}", bound.max_abs),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut factorizable = true;
    for _ in 0..1000 {
        let lhv = LocalHiddenVariableModel::random(rng.random_range(1..=16), &mut rng);
        factorizable &= factorizability_check(&lhv.response_table()?).holds;
        worst = worst.max(lhv.chsh()?.abs());
    }
    r.check(
        "1000 factorizable mixtures",
        factorizable && worst <= 2.0 + 1e-9,
        format!("max |S| = {worst}"),
    );
    Ok(r)
}

fn sdc() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("sdc");
    let engine = TheoryEngine::EnDqt(EnDqtParams::default());
    let chain = run(&Scenario::SdcChain(SdcChainParams::default()), &engine, 10, 1)?;
    let ledger = chain.ledger.as_ref().expect("sdc runs carry a ledger");
    r.check("DC(S1 -> S2) granted", ledger.has_dc("S1", "S2", 1.5), "");
    let chain_shape = chain.graph.has_edge("S0", "S1", EdgeKind::Sdi)
        && chain.graph.has_edge("S1", "S2", EdgeKind::Sdi)
        && chain.graph.active_edges().count() == 2;
    r.check(
        "graph is S0 -> S1 -> S2",
        chain_shape,
        format!("{} active edges", chain.graph.active_edges().count()),
    );
    r.check("ledger audit", ledger.audit().is_ok(), "");
    let late = run(
        &Scenario::SdcChain(SdcChainParams::canonical(1.0, 1.0, 2.0)),
        &engine,
        10,
        1,
    )?;
    let refused = !late.ledger.as_ref().is_some_and(|l| l.has_dc("S1", "S2", 2.0));
    r.check("late start refused", refused, "");
    Ok(r)
}

fn weak() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("weak");
    let grid: Vec<f64> = (0..10).map(|k| FRAC_PI_2 * k as f64 / 9.0).collect();
    let t = weak_sweep(&grid)?;
    let mono = t
        .rows
        .windows(2)
        .all(|w| w[1].d_star >= w[0].d_star - 1e-12 && w[1].visibility <= w[0].visibility + 1e-12);
    r.check("monotone columns", mono, "");
    let (a, z) = (t.rows[0], t.rows[9]);
    r.check(
        "strength 0",
        a.d_star.abs() < 1e-9 && (a.visibility - 1.0).abs() < 1e-9,
        format!("{a:?}"),
    );
    r.check(
        "strength pi/2",
        (z.d_star - 1.0).abs() < 1e-9 && z.visibility.abs() < 1e-9,
        format!("{z:?}"),
    );
    Ok(r)
}

/// Random valid and invalid operations; rejected ones are simply skipped.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, ops: usize) -> StructureGraph {
    let policy = if rng.random_bool(0.5) {
        UdiPolicy::Propagate
    } else {
        UdiPolicy::Detach
    };
    let mut g = StructureGraph::new(policy);
    let n = rng.random_range(2..8);
    let ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    for id in &ids {
        let node = match rng.random_range(0..3) {
            0 => SystemNode::generator(id.as_str()),
            1 => SystemNode::non_generator(id.as_str()),
            _ => SystemNode::initiator(id.as_str()),
        };
        let node = if rng.random_bool(0.3) {
            node.at([format!("{id}-l"), format!("{id}-r")])
        } else {
            node
        };
        let _ = g.add_node(node);
    }
    let mut t = 0.0;
    for _ in 0..ops {
        t += rng.random_range(0.0..1.0);
        let a = &ids[rng.random_range(0..n)];
        let b = &ids[rng.random_range(0..n)];
        let _ = match rng.random_range(0..5) {
            0 => g.add_interaction(a, b, EdgeKind::Udi, rng.random_bool(0.5), t),
            1 => g.add_interaction(a, b, EdgeKind::Sdi, true, t),
            2 => g.add_interaction(a, a, EdgeKind::PotentialDestruction, false, t),
            3 => {
                let tag = g.node(a).and_then(|n| n.locations.iter().next().cloned());
                match tag {
                    Some(tag) => g.promote_destruction(a, &tag, t),
                    None => Ok(()),
                }
            }
            _ => g.mark_determinate(a, t),
        };
    }
    g
}

/// Labels every node with its component over active edges and reports a
/// component holding both DS and IS members.
pub fn mixed_component(g: &StructureGraph) -> Option<String> {
    let part = g.partition().ok()?;
    let ids: Vec<&str> = g.nodes().map(|n| n.id.as_str()).collect();
    let mut comp: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    loop {
        let mut changed = false;
        for e in g.active_edges() {
            let (a, b) = (comp[e.from.as_str()], comp[e.to.as_str()]);
            if a != b {
                let m = a.min(b);
                *comp.get_mut(e.from.as_str()).expect("edge ends are nodes") = m;
                *comp.get_mut(e.to.as_str()).expect("edge ends are nodes") = m;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut kinds: BTreeMap<usize, (bool, bool)> = BTreeMap::new();
    for (id, c) in &comp {
        let k = kinds.entry(*c).or_default();
        if part[*id].is_ds() {
            k.0 = true;
        } else {
            k.1 = true;
        }
    }
    kinds
        .iter()
        .find(|(_, (ds, is))| *ds && *is)
        .map(|(c, _)| format!("component rooted at {}", ids[*c]))
}

/// Node and edge statement counts of a DOT document.
pub fn dot_counts(text: &str) -> std::result::Result<(usize, usize), String> {
    use graphviz_rust::dot_structures::{Graph, Stmt};
    let stmts = match graphviz_rust::parse(text)? {
        Graph::Graph { stmts, .. } | Graph::DiGraph { stmts, .. } => stmts,
    };
    let nodes = stmts.iter().filter(|s| matches!(s, Stmt::Node(_))).count();
    let edges = stmts.iter().filter(|s| matches!(s, Stmt::Edge(_))).count();
    Ok((nodes, edges))
}

fn structures() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("structures");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mixed, mut broken, mut dot_bad) = (Vec::new(), 0, Vec::new());
    for case in 0..1000 {
        let g = random_graph(&mut rng, 30);
        match g.partition() {
            Err(_) => broken += 1,
            Ok(_) => {
                if let Some(m) = mixed_component(&g) {
                    mixed.push(format!("case {case}: {m}"));
                }
            }
        }
        match dot_counts(&g.export_dot()) {
            Ok(counts) if counts == (g.nodes().count(), g.edges().len()) => {}
            other => dot_bad.push(format!("case {case}: {other:?}")),
        }
    }
    r.check("partition always succeeds", broken == 0, format!("{broken} failures"));
    r.check("no mixed DS/IS component", mixed.is_empty(), mixed.join("; "));
    r.check("DOT re-parses with same counts", dot_bad.is_empty(), dot_bad.join("; "));
    Ok(r)
}

fn determinism() -> Result<SuiteReport> {
    let mut r = SuiteReport::new("determinism");
    let cases = [
        (
            Scenario::SternGerlachInterferometer(SternGerlachParams::default()),
            TheoryEngine::Grw(GrwParams::new(1e-2, 0.25)?),
        ),
        (
            Scenario::EprBell(EprBellParams::default()),
            TheoryEngine::Mwi(MwiVariant::Local),
        ),
        (
            Scenario::EprBell(EprBellParams::default()),
            TheoryEngine::Relational(RelationalVariant::Rqm),
        ),
        (
            Scenario::SdcChain(SdcChainParams::default()),
            TheoryEngine::EnDqt(EnDqtParams::default()),
        ),
    ];
    for (sc, e) in cases {
        let a = run(&sc, &e, 50, 99)?;
        let b = run(&sc, &e, 50, 99)?;
        let same = a.log.to_jsonl() == b.log.to_jsonl() && a.stats == b.stats;
        r.check(format!("{} / {}", sc.name(), e.name()), same, "");
    }
    Ok(r)
}
