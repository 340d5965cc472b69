//! Degrees of differentiation, environment overlaps, the commutativity
//! criterion and the reversible/quasi-irreversible classification of
//! decoherence processes.
//!
//! The degree of differentiation of a property is the von Neumann entropy of
//! the system's reduced state normalized by `ln N`, where `N` is the reduced
//! dimension. A process is quasi-irreversible when the environment overlaps
//! stay below `eps` over a trailing window of the simulated span and the
//! environment is large enough; both thresholds are explicit parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, DensityOperator, Observable, StateVector, C64};
use crate::tol;

/// `D* = S(ρ_S) / ln N`, clamped to `[0, 1]`.
pub fn degree_of_differentiation(rho_s: &DensityOperator) -> Result<f64> {
    let n = rho_s.dim();
    if n < 2 {
        return Err(Error::invalid(
            "degree of differentiation needs a reduced space of dimension >= 2",
        ));
    }
    Ok((rho_s.von_neumann_entropy() / (n as f64).ln()).clamp(0.0, 1.0))
}

/// Inner products `⟨E_i(t)|E_l(t)⟩` of the normalized environment states
/// conditioned on each pointer state of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    pub time: f64,
    entries: CMatrix,
    weights: Vec<f64>,
}

impl OverlapMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Born weights `|α_i|²` of the pointer components.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_present(&self, i: usize) -> bool {
        self.weights[i].sqrt() >= tol::ABSENT_AMPLITUDE
    }

    pub fn get(&self, i: usize, l: usize) -> C64 {
        self.entries[(i, l)]
    }

    /// Largest off-diagonal modulus among present components; 0 when fewer
    /// than two components are present.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.weights.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for l in 0..n {
                if i != l && self.is_present(i) && self.is_present(l) {
                    worst = worst.max(self.entries[(i, l)].norm());
                }
            }
        }
        worst
    }
}

/// Decomposes `joint` as `Σ_i α_i |s_i⟩|E_i⟩` in the eigenbasis of
/// `pointer_basis` (which must act on the single factor `system`) and returns
/// the overlaps of the normalized `|E_i⟩`.
///
/// Absent components (`|α_i| < 1e-12`) get a unit diagonal and zero
/// off-diagonals.
pub fn environment_overlaps(
    joint: &StateVector,
    system: &str,
    pointer_basis: &Observable,
    time: f64,
) -> Result<OverlapMatrix> {
    if !joint.layout().contains(system) {
        return Err(Error::invalid(format!(
            "system '{system}' is not part of the joint state"
        )));
    }
    if pointer_basis.single_factor() != Some(system)
        || pointer_basis.layout().dim() != joint.layout().factor_dim(system).unwrap_or(0)
    {
        return Err(Error::invalid(format!(
            "pointer observable must act on the single factor '{system}'"
        )));
    }
    let m = joint.as_matrix(&[system])?;
    // conditional (unnormalized) environment states as rows
    let cond = pointer_basis.eigenvectors().adjoint() * m;
    let n = cond.nrows();
    let norms: Vec<f64> = (0..n).map(|i| cond.row(i).norm()).collect();
    let weights: Vec<f64> = norms.iter().map(|a| a * a).collect();

    let mut entries = CMatrix::identity(n, n);
    for i in 0..n {
        for l in 0..n {
            if i == l || norms[i] < tol::ABSENT_AMPLITUDE || norms[l] < tol::ABSENT_AMPLITUDE {
                continue;
            }
            let ip: C64 = cond
                .row(i)
                .iter()
                .zip(cond.row(l).iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            entries[(i, l)] = ip / (norms[i] * norms[l]);
        }
    }
    Ok(OverlapMatrix { time, entries, weights })
}

/// Result of the commutativity criterion `[H_SE, O_S] ≈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutativityCheck {
    pub passes: bool,
    /// `‖[H, O]‖_F / ‖H‖_F`
    pub residual: f64,
}

/// Lifts `o_s` onto the layout of `h_se` and measures the relative
/// commutator norm.
pub fn commutativity_check(h_se: &Observable, o_s: &Observable, tol: f64) -> Result<CommutativityCheck> {
    let o = o_s.lifted_matrix(h_se.layout())?;
    let residual = commutator_residual(h_se.matrix(), &o);
    Ok(CommutativityCheck {
        passes: residual <= tol,
        residual,
    })
}

pub(crate) fn commutator_residual(h: &CMatrix, o: &CMatrix) -> f64 {
    let hn = h.norm();
    if hn == 0.0 {
        return 0.0;
    }
    (h * o - o * h).norm() / hn
}

/// Thresholds standing in for "stable over time" and "many degrees of
/// freedom".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    /// Overlap magnitude regarded as zero.
    pub eps: f64,
    /// Trailing window as a fraction of the simulated span.
    pub window: f64,
    /// Minimum number of environment subsystems.
    pub size_threshold: usize,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            window: 0.25,
            size_threshold: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessKind {
    Reversible,
    QuasiIrreversible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessEvidence {
    pub env_size: usize,
    /// Time from the first dip below `eps` to the next return above 1/2.
    pub recurrence_estimate: Option<f64>,
    /// Length of the trailing stretch during which the overlap stayed below `eps`.
    pub sustained_below_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessClass {
    pub kind: ProcessKind,
    pub evidence: ProcessEvidence,
}

impl ProcessClass {
    pub fn is_quasi_irreversible(&self) -> bool {
        self.kind == ProcessKind::QuasiIrreversible
    }
}

/// Quasi-irreversible iff the maximum off-diagonal overlap is below `eps`
/// for every sample in the trailing window and `env_size` reaches the size
/// threshold.
pub fn classify_process(series: &[OverlapMatrix], env_size: usize, params: &StabilityParams) -> Result<ProcessClass> {
    let (first, last) = match (series.first(), series.last()) {
        (Some(f), Some(l)) => (f.time, l.time),
        _ => return Err(Error::invalid("overlap series is empty")),
    };
    if series.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::invalid("overlap series is not time-ordered"));
    }
    let magnitudes: Vec<f64> = series.iter().map(OverlapMatrix::max_off_diagonal).collect();
    let cutoff = last - params.window * (last - first);
    let window_ok = series
        .iter()
        .zip(&magnitudes)
        .filter(|(o, _)| o.time >= cutoff)
        .all(|(_, &m)| m < params.eps);

    let mut sustained_since = None;
    for (o, &m) in series.iter().zip(&magnitudes).rev() {
        if m < params.eps {
            sustained_since = Some(o.time);
        } else {
            break;
        }
    }
    let sustained_below_eps = sustained_since.map_or(0.0, |t| last - t);

    let recurrence_estimate = series
        .iter()
        .zip(&magnitudes)
        .position(|(_, &m)| m < params.eps)
        .and_then(|dip| {
            let t_dip = series[dip].time;
            series[dip..]
                .iter()
                .zip(&magnitudes[dip..])
                .find(|(_, &m)| m > 0.5)
                .map(|(o, _)| o.time - t_dip)
        });

    let kind = if window_ok && env_size >= params.size_threshold {
        ProcessKind::QuasiIrreversible
    } else {
        ProcessKind::Reversible
    };
    Ok(ProcessClass {
        kind,
        evidence: ProcessEvidence {
            env_size,
            recurrence_estimate,
            sustained_below_eps,
        },
    })
}

/// Time series of `D*(P, S, ST, t)` for one property of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentiationReport {
    pub property: String,
    pub system: String,
    /// Opaque region tag; carried through, never interpreted.
    pub region: String,
    samples: Vec<(f64, f64)>,
    pub converged_value: Option<f64>,
    pub stable: bool,
}

impl DifferentiationReport {
    pub fn new(property: impl Into<String>, system: impl Into<String>, region: impl Into<String>) -> Self {
        Self {
            property: property.into(),
            system: system.into(),
            region: region.into(),
            samples: Vec::new(),
            converged_value: None,
            stable: false,
        }
    }

    /// Appends a sample; times must strictly increase and `D*` must lie in
    /// `[0, 1]` up to rounding.
    pub fn push(&mut self, t: f64, d_star: f64) -> Result<()> {
        if let Some(&(prev, _)) = self.samples.last() {
            if t <= prev {
                return Err(Error::invalid(format!("sample time {t} does not follow {prev}")));
            }
        }
        if !(-tol::COMPLETENESS..=1.0 + tol::COMPLETENESS).contains(&d_star) {
            return Err(Error::invalid(format!("D* = {d_star} outside [0, 1]")));
        }
        self.samples.push((t, d_star.clamp(0.0, 1.0)));
        Ok(())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Fills `converged_value` and `stable` from [`stable_degree`].
    pub fn finalize(&mut self, eps: f64, window: f64) {
        self.converged_value = stable_degree(self, eps, window);
        self.stable = self.converged_value.is_some();
    }

    /// Rows `t,d_star` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,d_star\n");
        for (t, d) in &self.samples {
            out.push_str(&format!("{t},{d}\n"));
        }
        out
    }
}

/// The converged `D*` if every sample in the trailing window (a fraction of
/// the span) lies within `eps` of every other; `None` otherwise.
pub fn stable_degree(report: &DifferentiationReport, eps: f64, window: f64) -> Option<f64> {
    let samples = report.samples();
    let (&(first, _), &(last, value)) = (samples.first()?, samples.last()?);
    let cutoff = last - window * (last - first);
    let (lo, hi) = samples
        .iter()
        .filter(|(t, _)| *t >= cutoff)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, d)| {
            (lo.min(d), hi.max(d))
        });
    (hi - lo < eps).then_some(value)
}
