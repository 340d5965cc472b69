//! Decoherence dynamics: von Neumann coupling, the pure-dephasing
//! spin-environment model and piecewise-constant interaction schedules.
//!
//! Conventions: a qubit's "up" is the computational `|0⟩`, the `+1`
//! eigenvector of `σ_z`. Schedules use Hamiltonians of the form
//! `g P ⊗ Q` on a pair of qubit factors; self-Hamiltonians are zero unless
//! added explicitly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::differentiation::{environment_overlaps, OverlapMatrix};
use crate::error::{Error, Result};
use crate::hilbert::linalg::{c, hermitian_eigen, kron, propagator_from_eigen};
use crate::hilbert::{embed, CMatrix, CVector, Observable, Pauli, SpaceLayout, StateVector, C64};
use crate::tol;

/// Orthonormal vectors `e_0 = v/|v|, e_1, …, e_{count−1}` completed by
/// Gram-Schmidt over the computational basis.
fn orthonormal_completion(v: &CVector, count: usize) -> Result<Vec<CVector>> {
    let d = v.len();
    if count > d {
        return Err(Error::invalid(format!(
            "environment of dimension {d} cannot hold {count} orthogonal records"
        )));
    }
    let mut out = vec![v.unscale(v.norm())];
    for k in 0..d {
        if out.len() == count {
            break;
        }
        let mut w = CVector::zeros(d);
        w[k] = c(1.0, 0.0);
        for e in &out {
            let proj = e.dotc(&w);
            w -= e * proj;
        }
        let n = w.norm();
        if n > 1e-8 {
            out.push(w.unscale(n));
        }
    }
    Ok(out)
}

/// `α|↑⟩|E_↑⟩ + β|↓⟩|E_↓⟩` with `|E_↑⟩ = env_ready` and `|E_↓⟩` an
/// orthogonal partner.
pub fn von_neumann_couple(system: &StateVector, env_ready: &StateVector) -> Result<StateVector> {
    let label = match system.layout().factors() {
        [f] if f.dim == 2 => f.label.clone(),
        _ => return Err(Error::invalid("von Neumann coupling needs a single-qubit system")),
    };
    von_neumann_couple_pointer(system, &Observable::pauli(&label, Pauli::Z)?, env_ready)
}

/// Multi-level version: `Σ_i ⟨v_i|s⟩ |v_i⟩|E_i⟩` over the eigenbasis `v_i` of
/// `pointer`, with mutually orthogonal `E_i` and `E_0 = env_ready`.
pub fn von_neumann_couple_pointer(
    system: &StateVector,
    pointer: &Observable,
    env_ready: &StateVector,
) -> Result<StateVector> {
    if pointer.layout() != system.layout() {
        return Err(Error::invalid("pointer observable must act on the system's layout"));
    }
    let layout = system.layout().concat(env_ready.layout())?;
    let d = system.dim();
    let records = orthonormal_completion(env_ready.amplitudes(), d)?;
    let coeffs = pointer.eigenvectors().adjoint() * system.amplitudes();
    let mut amps = CVector::zeros(layout.dim());
    for (i, rec) in records.iter().enumerate() {
        let v = pointer.eigenvector(i);
        amps += (v.kronecker(rec)) * coeffs[i];
    }
    StateVector::normalized(amps, layout)
}

/// Records the pointer basis of `pointer`'s factor into `apparatus` inside
/// an existing joint state: `U = Σ_i |v_i⟩⟨v_i| ⊗ X^i`, with `X` the cyclic
/// shift on the apparatus. An apparatus in `|0⟩` ends in `|i⟩` on outcome `i`.
pub fn couple_pointer_into(state: &StateVector, pointer: &Observable, apparatus: &str) -> Result<StateVector> {
    let system = pointer
        .single_factor()
        .ok_or_else(|| Error::invalid("pointer must act on a single factor"))?;
    let da = state
        .layout()
        .factor_dim(apparatus)
        .ok_or_else(|| Error::invalid(format!("unknown apparatus factor '{apparatus}'")))?;
    let n = pointer.eigenvalues().len();
    if da < n {
        return Err(Error::invalid(format!(
            "apparatus '{apparatus}' cannot hold {n} records"
        )));
    }
    let shift = |k: usize| CMatrix::from_fn(da, da, |i, j| if i == (j + k) % da { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let mut u = CMatrix::zeros(n * da, n * da);
    for (i, (_, proj)) in pointer.projectors().into_iter().enumerate() {
        u += kron(&proj, &shift(i));
    }
    state.evolve_local(&u, &[system, apparatus])
}

/// Environment of `n` qubits coupled to a system qubit by
/// `H = σ_z ⊗ Σ_k g_k σ_z^{(k)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEnvironment {
    couplings: Vec<f64>,
    /// Per-qubit initial amplitudes `(a_k, b_k)`, normalized.
    initial: Vec<[C64; 2]>,
}

impl SpinEnvironment {
    /// Every environment qubit starts in `|+⟩`.
    pub fn new(couplings: Vec<f64>) -> Result<Self> {
        if couplings.is_empty() {
            return Err(Error::invalid("spin environment needs at least one qubit"));
        }
        if couplings.iter().any(|g| !g.is_finite()) {
            return Err(Error::invalid("spin couplings must be finite"));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let initial = vec![[c(s, 0.0), c(s, 0.0)]; couplings.len()];
        Ok(Self { couplings, initial })
    }

    /// Couplings drawn uniformly from `[0.5, 1.5]`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.random_range(0.5..=1.5)).collect())
    }

    pub fn with_initial(mut self, states: Vec<[C64; 2]>) -> Result<Self> {
        if states.len() != self.couplings.len() {
            return Err(Error::invalid("one initial state per environment qubit is required"));
        }
        self.initial = states
            .into_iter()
            .map(|[a, b]| {
                let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if n == 0.0 {
                    Err(Error::invalid("environment qubit state is zero"))
                } else {
                    Ok([a / n, b / n])
                }
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n()).map(|k| format!("E{k}")).collect()
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let mut amps = CVector::from_element(1, c(1.0, 0.0));
        for [a, b] in &self.initial {
            amps = amps.kronecker(&CVector::from_column_slice(&[*a, *b]));
        }
        let layout = SpaceLayout::new(self.labels().into_iter().map(|l| (l, 2)))?;
        StateVector::normalized(amps, layout)
    }

    /// `⟨E_↑(t)|E_↓(t)⟩ = Π_k (|a_k|² e^{2i g_k t} + |b_k|² e^{−2i g_k t})`,
    /// which is `Π_k cos(2 g_k t)` for `|+⟩` initial states.
    pub fn analytic_overlap(&self, t: f64) -> C64 {
        self.couplings
            .iter()
            .zip(&self.initial)
            .map(|(g, [a, b])| C64::from_polar(a.norm_sqr(), 2.0 * g * t) + C64::from_polar(b.norm_sqr(), -2.0 * g * t))
            .product()
    }
}

/// Exact evolution of `system ⊗ env` under the dephasing Hamiltonian; the
/// propagator is diagonal, `exp(−i t z_s Σ_k g_k z_k)` on each basis state.
pub fn spin_env_evolve(system: &StateVector, env: &SpinEnvironment, t: f64) -> Result<StateVector> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("evolution time must be >= 0, got {t}")));
    }
    if system.layout().len() != 1 || system.dim() != 2 {
        return Err(Error::invalid("spin environment couples to a single-qubit system"));
    }
    let joint = system.tensor(&env.initial_state()?)?;
    let n = env.n();
    let mut amps = joint.amplitudes().clone();
    for (idx, a) in amps.iter_mut().enumerate() {
        let z_s = if idx >> n & 1 == 0 { 1.0 } else { -1.0 };
        let field: f64 = env
            .couplings
            .iter()
            .enumerate()
            .map(|(k, g)| if idx >> (n - 1 - k) & 1 == 0 { *g } else { -*g })
            .sum();
        *a *= C64::from_polar(1.0, -t * z_s * field);
    }
    joint.with_amplitudes(amps)
}

/// Single-party factor of a schedule Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PartyOp {
    Pauli(Pauli),
    Up,
    Down,
}

impl PartyOp {
    fn from_char(ch: char) -> Option<Self> {
        match ch.to_ascii_lowercase() {
            'u' => Some(PartyOp::Up),
            'd' => Some(PartyOp::Down),
            'i' => None,
            other => Pauli::from_char(other).map(PartyOp::Pauli),
        }
    }

    fn matrix(self) -> CMatrix {
        match self {
            PartyOp::Pauli(p) => p.matrix(),
            PartyOp::Up => CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])),
            PartyOp::Down => CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])),
        }
    }

    /// Pauli basis left undisturbed by this factor.
    fn pointer(self) -> Pauli {
        match self {
            PartyOp::Pauli(p) => p,
            PartyOp::Up | PartyOp::Down => Pauli::Z,
        }
    }
}

/// One scheduled pairwise interaction `H = g P ⊗ Q` on `(parties.0, parties.1)`
/// active on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: f64,
    pub end: f64,
    pub parties: (String, String),
    /// Two letters, e.g. `"zx"` for `σ_z ⊗ σ_x`. Besides `x`, `y`, `z` the
    /// projectors `u = |0⟩⟨0|` and `d = |1⟩⟨1|` give controlled couplings.
    pub tag: String,
    pub strength: f64,
}

impl ScheduleEntry {
    pub fn new(start: f64, end: f64, a: &str, b: &str, tag: &str, strength: f64) -> Self {
        Self {
            start,
            end,
            parties: (a.to_string(), b.to_string()),
            tag: tag.to_string(),
            strength,
        }
    }

    fn ops(&self) -> Result<(PartyOp, PartyOp)> {
        let mut chars = self.tag.chars().map(PartyOp::from_char);
        match (chars.next(), chars.next(), chars.next()) {
            (Some(Some(p)), Some(Some(q)), None) => Ok((p, q)),
            _ => Err(Error::invalid(format!("unknown Hamiltonian tag '{}'", self.tag))),
        }
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    /// The coupling as an observable on the two-party layout.
    pub fn local_hamiltonian(&self) -> Result<Observable> {
        let (p, q) = self.ops()?;
        let layout = SpaceLayout::new([(self.parties.0.as_str(), 2), (self.parties.1.as_str(), 2)])?;
        Observable::new(kron(&p.matrix(), &q.matrix()).scale(self.strength), layout)
    }

    /// The coupling lifted onto `joint`; both parties must be qubit factors.
    pub fn hamiltonian(&self, joint: &SpaceLayout) -> Result<CMatrix> {
        for p in [&self.parties.0, &self.parties.1] {
            if joint.factor_dim(p) != Some(2) {
                return Err(Error::invalid(format!("schedule party '{p}' is not a qubit factor")));
            }
        }
        let local = self.local_hamiltonian()?;
        embed(local.matrix(), joint, &[&self.parties.0, &self.parties.1])
    }

    /// The Pauli observable on `party` that commutes with this coupling, so
    /// the basis it records into.
    pub fn pointer_for(&self, party: &str) -> Result<Observable> {
        let (p, q) = self.ops()?;
        if party == self.parties.0 {
            Observable::pauli(party, p.pointer())
        } else if party == self.parties.1 {
            Observable::pauli(party, q.pointer())
        } else {
            Err(Error::invalid(format!("'{party}' is not a party of this interaction")))
        }
    }

    pub fn involves(&self, party: &str) -> bool {
        self.parties.0 == party || self.parties.1 == party
    }
}

/// Time-ordered interactions plus optional always-on self-Hamiltonians.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionSchedule {
    entries: Vec<ScheduleEntry>,
    self_terms: Vec<(String, CMatrix)>,
}

impl InteractionSchedule {
    /// Entries are sorted by start time (stable); each needs `start < end`.
    pub fn new(mut entries: Vec<ScheduleEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.start.is_finite() && e.end.is_finite() && e.start < e.end) {
                return Err(Error::invalid(format!(
                    "schedule entry {:?} needs finite start < end",
                    e.parties
                )));
            }
            if !e.strength.is_finite() {
                return Err(Error::invalid("coupling strength must be finite"));
            }
            if e.parties.0 == e.parties.1 {
                return Err(Error::invalid("an interaction needs two distinct parties"));
            }
        }
        entries.sort_by(|a, b| a.start.total_cmp(&b.start));
        Ok(Self {
            entries,
            self_terms: Vec::new(),
        })
    }

    /// Adds a self-Hamiltonian on one factor, active for the whole run.
    pub fn with_self_hamiltonian(mut self, label: &str, h: &Observable) -> Result<Self> {
        if h.single_factor() != Some(label) {
            return Err(Error::invalid("self-Hamiltonian must act on exactly the named factor"));
        }
        self.self_terms.push((label.to_string(), h.matrix().clone()));
        Ok(self)
    }

    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Latest end time, or 0 for an empty schedule.
    pub fn end_time(&self) -> f64 {
        self.entries.iter().map(|e| e.end).fold(0.0, f64::max)
    }

    /// Total Hamiltonian on `joint` at time `t`.
    pub fn hamiltonian_at(&self, joint: &SpaceLayout, t: f64) -> Result<CMatrix> {
        let d = joint.dim();
        let mut h = CMatrix::zeros(d, d);
        for e in self.entries.iter().filter(|e| e.active_at(t)) {
            h += e.hamiltonian(joint)?;
        }
        for (label, m) in &self.self_terms {
            h += embed(m, joint, &[label])?;
        }
        Ok(h)
    }

    fn validate(&self, joint: &SpaceLayout) -> Result<()> {
        for e in &self.entries {
            e.hamiltonian(joint)?;
        }
        for (label, _) in &self.self_terms {
            if !joint.contains(label) {
                return Err(Error::invalid(format!(
                    "self-Hamiltonian factor '{label}' not in state"
                )));
            }
        }
        Ok(())
    }

    /// Times in `(t0, t1)` where the active set changes.
    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .entries
            .iter()
            .flat_map(|e| [e.start, e.end])
            .filter(|&b| b > t0 && b < t1)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Sampled states along a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Overlap matrices of `system` in the eigenbasis of `pointer` at each sample.
    pub fn overlap_series(&self, system: &str, pointer: &Observable) -> Result<Vec<OverlapMatrix>> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| environment_overlaps(s, system, pointer, t))
            .collect()
    }

    /// Rows `t,p0,p1,…` of computational-basis populations.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, StateVector::dim);
        let mut out = String::from("t");
        for i in 0..d {
            out.push_str(&format!(",p{i}"));
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for a in s.amplitudes().iter() {
                out.push_str(&format!(",{}", a.norm_sqr()));
            }
            out.push('\n');
        }
        out
    }
}

/// Evolves `state` from `t0` to `t1`, splitting at every change of the
/// active set and using the exact propagator on each piece.
pub fn evolve_between(state: &StateVector, sched: &InteractionSchedule, t0: f64, t1: f64) -> Result<StateVector> {
    if t1 < t0 {
        return Err(Error::invalid("cannot evolve backwards in time"));
    }
    sched.validate(state.layout())?;
    let mut stepper = Stepper::new(sched, state.clone(), t0);
    stepper.advance(t1)?;
    Ok(stepper.state)
}

/// Samples every `dt` from 0 to the schedule's end time.
pub fn run_schedule(initial: &StateVector, sched: &InteractionSchedule, dt: f64) -> Result<Trajectory> {
    run_schedule_until(initial, sched, dt, sched.end_time())
}

/// Samples every `dt` from 0 to `t_end` (inclusive).
pub fn run_schedule_until(
    initial: &StateVector,
    sched: &InteractionSchedule,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 0.0) {
        return Err(Error::invalid("end time must be >= 0"));
    }
    sched.validate(initial.layout())?;
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut stepper = Stepper::new(sched, initial.clone(), 0.0);
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    for k in 1..=steps {
        let t = (k as f64 * dt).min(t_end);
        stepper.advance(t)?;
        let norm = stepper.state.amplitudes().norm();
        if (norm - 1.0).abs() > tol::COMPLETENESS {
            return Err(Error::integrity(format!("norm drifted to {norm} at t = {t}")));
        }
        times.push(t);
        states.push(stepper.state.clone());
    }
    Ok(Trajectory { times, states })
}

/// Walks a state forward, caching the eigendecomposition of the current
/// piece's Hamiltonian.
struct Stepper<'a> {
    sched: &'a InteractionSchedule,
    state: StateVector,
    t: f64,
    cached: Option<(f64, Vec<f64>, CMatrix)>,
}

impl<'a> Stepper<'a> {
    fn new(sched: &'a InteractionSchedule, state: StateVector, t: f64) -> Self {
        Self {
            sched,
            state,
            t,
            cached: None,
        }
    }

    fn advance(&mut self, target: f64) -> Result<()> {
        let mut marks = self.sched.breakpoints(self.t, target);
        marks.push(target);
        for m in marks {
            self.step_within_piece(m)?;
        }
        Ok(())
    }

    fn step_within_piece(&mut self, to: f64) -> Result<()> {
        let span = to - self.t;
        if span <= 0.0 {
            return Ok(());
        }
        let mid = self.t + 0.5 * span;
        let piece_start = self
            .sched
            .breakpoints(f64::NEG_INFINITY, mid)
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY);
        let fresh = !matches!(&self.cached, Some((s, _, _)) if *s == piece_start);
        if fresh {
            let h = self.sched.hamiltonian_at(self.state.layout(), mid)?;
            let (values, vectors) = hermitian_eigen(&h);
            self.cached = Some((piece_start, values, vectors));
        }
        let (_, values, vectors) = self.cached.as_ref().expect("cache filled above");
        let u = propagator_from_eigen(values, vectors, span);
        self.state = self.state.with_amplitudes(u * self.state.amplitudes())?;
        self.t = to;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::differentiation::degree_of_differentiation;
    use crate::hilbert::linalg::{expm_hermitian, max_abs_diff};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus(label: &str) -> StateVector {
        StateVector::single(label, &[c(1.0, 0.0), c(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn von_neumann_on_superposition_is_maximally_entangled() {
        let env = StateVector::single("E", &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let joint = von_neumann_couple(&plus("S"), &env).unwrap();
        let d = degree_of_differentiation(&joint.reduced(&["S"]).unwrap()).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let o = environment_overlaps(&joint, "S", &z, 0.0).unwrap();
        assert!(o.max_off_diagonal() < 1e-12);
    }

    #[test]
    fn von_neumann_on_up_is_a_product() {
        let up = StateVector::single("S", &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let env = StateVector::single("E", &[c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let joint = von_neumann_couple(&up, &env).unwrap();
        assert!(joint.same_ray(&up.tensor(&env).unwrap(), 1e-12));
        let d = degree_of_differentiation(&joint.reduced(&["S"]).unwrap()).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn von_neumann_rejects_qutrit_system() {
        let s = StateVector::single("S", &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(von_neumann_couple(&s, &plus("E")).is_err());
    }

    #[test]
    fn multilevel_coupling_in_rotated_basis() {
        let s = StateVector::single("S", &[c(0.3, 0.0), c(0.5, 0.1), c(0.2, -0.4)]).unwrap();
        let ptr = Observable::new(
            CMatrix::from_fn(3, 3, |i, j| {
                c(
                    (i + j) as f64,
                    if i < j {
                        1.0
                    } else if i > j {
                        -1.0
                    } else {
                        0.0
                    },
                )
            }),
            s.layout().clone(),
        )
        .unwrap();
        let env = StateVector::basis(SpaceLayout::single("E", 4).unwrap(), 2).unwrap();
        let joint = von_neumann_couple_pointer(&s, &ptr, &env).unwrap();
        let o = environment_overlaps(&joint, "S", &ptr, 0.0).unwrap();
        assert!(o.max_off_diagonal() < 1e-12);
        // weights are the Born probabilities in the pointer basis
        for i in 0..3 {
            let p = ptr.eigenvector(i).dotc(s.amplitudes()).norm_sqr();
            assert!((o.weights()[i] - p).abs() < 1e-12);
        }
    }

    /// Oracle: dense 4-dimensional propagator for one environment spin.
    #[test]
    fn single_spin_overlap_matches_dense_propagator() {
        let g = std::f64::consts::PI / 8.0;
        let env = SpinEnvironment::new(vec![g]).unwrap();
        let joint = spin_env_evolve(&plus("S"), &env, 1.0).unwrap();
        let h = kron(&crate::hilbert::linalg::pauli_z(), &crate::hilbert::linalg::pauli_z()).scale(g);
        let start = plus("S").tensor(&env.initial_state().unwrap()).unwrap();
        let dense = start.evolve(&expm_hermitian(&h, 1.0)).unwrap();
        assert!(joint.same_ray(&dense, 1e-12));
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let o = environment_overlaps(&joint, "S", &z, 1.0).unwrap();
        assert!((o.get(0, 1).norm() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ten_equal_spins_vanish_at_first_zero() {
        let g = 0.9;
        let env = SpinEnvironment::new(vec![g; 10]).unwrap();
        let t = std::f64::consts::PI / (4.0 * g);
        assert!(env.analytic_overlap(t).norm() < 1e-12);
        let joint = spin_env_evolve(&plus("S"), &env, t).unwrap();
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let o = environment_overlaps(&joint, "S", &z, t).unwrap();
        assert!(o.max_off_diagonal() < 1e-12);
    }

    #[test]
    fn zero_time_is_a_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = SpinEnvironment::random(4, &mut rng).unwrap();
        assert!(env.couplings().iter().all(|g| (0.5..=1.5).contains(g)));
        let joint = spin_env_evolve(&plus("S"), &env, 0.0).unwrap();
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let o = environment_overlaps(&joint, "S", &z, 0.0).unwrap();
        assert!((o.get(0, 1).norm() - 1.0).abs() < 1e-12);
        assert!(spin_env_evolve(&plus("S"), &env, -1.0).is_err());
    }

    #[test]
    fn non_plus_initial_states_follow_analytic_overlap() {
        let env = SpinEnvironment::new(vec![0.7, 1.1])
            .unwrap()
            .with_initial(vec![[c(0.6, 0.0), c(0.0, 0.8)], [c(1.0, 0.0), c(1.0, 1.0)]])
            .unwrap();
        let t = 0.83;
        let joint = spin_env_evolve(&plus("S"), &env, t).unwrap();
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let o = environment_overlaps(&joint, "S", &z, t).unwrap();
        assert!((o.get(0, 1) - env.analytic_overlap(t)).norm() < 1e-12);
    }

    fn two_qubits() -> StateVector {
        plus("A").tensor(&plus("B")).unwrap()
    }

    #[test]
    fn empty_schedule_gives_constant_trajectory() {
        let sched = InteractionSchedule::new(vec![]).unwrap();
        let traj = run_schedule_until(&two_qubits(), &sched, 0.1, 1.0).unwrap();
        assert_eq!(traj.times.len(), 11);
        assert!(traj.states.iter().all(|s| s.same_ray(&traj.states[0], 1e-14)));
    }

    #[test]
    fn unknown_tag_and_bad_parties_are_rejected() {
        let bad = InteractionSchedule::new(vec![ScheduleEntry::new(0.0, 1.0, "A", "B", "zq", 1.0)]).unwrap();
        assert!(run_schedule(&two_qubits(), &bad, 0.1).is_err());
        let missing = InteractionSchedule::new(vec![ScheduleEntry::new(0.0, 1.0, "A", "C", "zx", 1.0)]).unwrap();
        assert!(run_schedule(&two_qubits(), &missing, 0.1).is_err());
        assert!(InteractionSchedule::new(vec![ScheduleEntry::new(1.0, 1.0, "A", "B", "zx", 1.0)]).is_err());
        assert!(run_schedule(&two_qubits(), &InteractionSchedule::default(), 0.0).is_err());
    }

    #[test]
    fn sequential_chain_matches_piecewise_propagators() {
        let layout_state = plus("S0")
            .tensor(&StateVector::single("S1", &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap())
            .unwrap()
            .tensor(&StateVector::single("S2", &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap())
            .unwrap();
        let g = std::f64::consts::FRAC_PI_4;
        let sched = InteractionSchedule::new(vec![
            ScheduleEntry::new(0.0, 1.0, "S0", "S1", "zy", g),
            ScheduleEntry::new(1.0, 2.0, "S1", "S2", "zy", g),
        ])
        .unwrap();
        let traj = run_schedule(&layout_state, &sched, 0.25).unwrap();
        let l = layout_state.layout();
        let h1 = sched.entries()[0].hamiltonian(l).unwrap();
        let h2 = sched.entries()[1].hamiltonian(l).unwrap();
        let oracle = layout_state
            .evolve(&expm_hermitian(&h1, 1.0))
            .unwrap()
            .evolve(&expm_hermitian(&h2, 1.0))
            .unwrap();
        assert!(traj.last().same_ray(&oracle, 1e-10));
        // exp(-i π/4 Z⊗Y) on |+⟩|0⟩ records S0's z value in S1
        let z0 = Observable::pauli("S0", Pauli::Z).unwrap();
        let mid = &traj.states[4];
        let o = environment_overlaps(mid, "S0", &z0, 1.0).unwrap();
        assert!(o.max_off_diagonal() < 1e-10);
    }

    #[test]
    fn commuting_disjoint_couplings_commute() {
        let st = two_qubits().tensor(&plus("C")).unwrap().tensor(&plus("D")).unwrap();
        let a = ScheduleEntry::new(0.0, 1.0, "A", "B", "zx", 0.7);
        let b = ScheduleEntry::new(1.0, 2.0, "C", "D", "xy", 1.3);
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        a2.start = 1.0;
        a2.end = 2.0;
        b2.start = 0.0;
        b2.end = 1.0;
        let one = run_schedule(&st, &InteractionSchedule::new(vec![a, b]).unwrap(), 0.5).unwrap();
        let two = run_schedule(&st, &InteractionSchedule::new(vec![a2, b2]).unwrap(), 0.5).unwrap();
        assert!(one.last().same_ray(two.last(), 1e-10));
    }

    #[test]
    fn overlapping_entries_sum_hamiltonians() {
        let st = two_qubits().tensor(&plus("C")).unwrap();
        let e1 = ScheduleEntry::new(0.0, 1.0, "A", "B", "zx", 0.4);
        let e2 = ScheduleEntry::new(0.0, 1.0, "B", "C", "yz", 0.9);
        let sched = InteractionSchedule::new(vec![e1.clone(), e2.clone()]).unwrap();
        let traj = run_schedule(&st, &sched, 0.3).unwrap();
        let h = e1.hamiltonian(st.layout()).unwrap() + e2.hamiltonian(st.layout()).unwrap();
        let oracle = st.evolve(&expm_hermitian(&h, 1.0)).unwrap();
        assert!(traj.last().same_ray(&oracle, 1e-10));
        assert!((traj.times.last().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn self_hamiltonian_hook_is_applied() {
        let h = Observable::pauli("A", Pauli::Z).unwrap();
        let sched = InteractionSchedule::new(vec![ScheduleEntry::new(0.0, 1.0, "A", "B", "zz", 0.0)])
            .unwrap()
            .with_self_hamiltonian("A", &h)
            .unwrap();
        let out = run_schedule(&two_qubits(), &sched, 0.5).unwrap();
        let oracle = two_qubits()
            .evolve_local(&expm_hermitian(h.matrix(), 1.0), &["A"])
            .unwrap();
        assert!(out.last().same_ray(&oracle, 1e-10));
    }

    #[test]
    fn pointer_for_each_party() {
        let e = ScheduleEntry::new(0.0, 1.0, "A", "B", "zx", 1.0);
        let pa = e.pointer_for("A").unwrap();
        let pb = e.pointer_for("B").unwrap();
        assert!(max_abs_diff(pa.matrix(), &Pauli::Z.matrix()) < 1e-14);
        assert!(max_abs_diff(pb.matrix(), &Pauli::X.matrix()) < 1e-14);
        assert!(e.pointer_for("C").is_err());
        let csv = run_schedule(&two_qubits(), &InteractionSchedule::new(vec![e]).unwrap(), 0.5)
            .unwrap()
            .to_csv();
        assert!(csv.starts_with("t,p0,p1,p2,p3\n0,"));
    }

    #[test]
    fn projector_tags_give_controlled_flips() {
        let layout = SpaceLayout::new([("P", 2), ("D", 2)]).unwrap();
        let e = ScheduleEntry::new(0.0, 1.0, "P", "D", "ux", std::f64::consts::FRAC_PI_2);
        let sched = InteractionSchedule::new(vec![e.clone()]).unwrap();
        let flipped = evolve_between(&StateVector::basis(layout.clone(), 0).unwrap(), &sched, 0.0, 1.0).unwrap();
        assert!(flipped.same_ray(&StateVector::basis(layout.clone(), 1).unwrap(), 1e-12));
        let kept = evolve_between(&StateVector::basis(layout.clone(), 2).unwrap(), &sched, 0.0, 1.0).unwrap();
        assert!(kept.same_ray(&StateVector::basis(layout, 2).unwrap(), 1e-12));
        assert!(max_abs_diff(e.pointer_for("P").unwrap().matrix(), &Pauli::Z.matrix()) < 1e-15);
        assert!(ScheduleEntry::new(0.0, 1.0, "P", "D", "ix", 1.0)
            .local_hamiltonian()
            .is_err());
    }

    #[test]
    fn pointer_coupling_into_joint_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sys = StateVector::single("S", &[c(0.6, 0.0), c(0.8, 0.0)]).unwrap();
        let app = StateVector::single("L", &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let joint = sys.tensor(&app).unwrap();
        let xobs = Observable::pauli("S", Pauli::X).unwrap();
        let out = couple_pointer_into(&joint, &xobs, "L").unwrap();
        // weights of records |0⟩, |1⟩ follow the x-basis Born rule
        let m = out.marginal("L").unwrap();
        let plus = ((0.6 + 0.8) * s).powi(2);
        assert!((m[0] - plus).abs() < 1e-12 && (m[1] - (1.0 - plus)).abs() < 1e-12 && m[2] < 1e-15);
        assert!(couple_pointer_into(&joint, &xobs, "missing").is_err());
    }
}
