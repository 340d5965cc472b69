use super::linalg::{is_unitary, max_abs_diff, pauli_x, pauli_y, pauli_z, CMatrix, ZERO};
use super::observable::embed;
use super::DensityOperator;
use crate::error::{Error, Result};
use crate::tol;

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    kraus: Vec<CMatrix>,
    in_dim: usize,
    out_dim: usize,
}

impl Channel {
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let (out_dim, in_dim) = kraus
            .first()
            .map(|k| k.shape())
            .ok_or_else(|| Error::invalid("channel needs at least one Kraus operator"))?;
        let mut sum = CMatrix::from_element(in_dim, in_dim, ZERO);
        for k in &kraus {
            if k.shape() != (out_dim, in_dim) {
                return Err(Error::invalid("Kraus operators have inconsistent shapes"));
            }
            sum += k.adjoint() * k;
        }
        if max_abs_diff(&sum, &CMatrix::identity(in_dim, in_dim)) > tol::COMPLETENESS {
            return Err(Error::invalid("Kraus operators are not complete (Σ K†K ≠ I)"));
        }
        Ok(Self { kraus, in_dim, out_dim })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            kraus: vec![CMatrix::identity(dim, dim)],
            in_dim: dim,
            out_dim: dim,
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        if !is_unitary(&u, tol::COMPLETENESS) {
            return Err(Error::invalid("channel unitary is not unitary"));
        }
        Self::new(vec![u])
    }

    /// Qubit depolarizing channel `ρ ↦ (1−p)ρ + p I/2`.
    pub fn depolarizing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("depolarizing probability must lie in [0, 1]"));
        }
        let k0 = CMatrix::identity(2, 2).scale((1.0 - 0.75 * p).sqrt());
        let s = (p / 4.0).sqrt();
        Self::new(vec![k0, pauli_x().scale(s), pauli_y().scale(s), pauli_z().scale(s)])
    }

    /// Qubit dephasing `ρ ↦ (1−p)ρ + p ZρZ`.
    pub fn dephasing(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("dephasing probability must lie in [0, 1]"));
        }
        Self::new(vec![
            CMatrix::identity(2, 2).scale((1.0 - p).sqrt()),
            pauli_z().scale(p.sqrt()),
        ])
    }

    /// Replaces any `dim`-level input with `I/dim`.
    pub fn completely_depolarizing(dim: usize) -> Result<Self> {
        let mut kraus = Vec::with_capacity(dim * dim);
        let s = (1.0 / dim as f64).sqrt();
        for i in 0..dim {
            for j in 0..dim {
                let mut k = CMatrix::from_element(dim, dim, ZERO);
                k[(i, j)] = s.into();
                kraus.push(k);
            }
        }
        Self::new(kraus)
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }
}

/// `Σ K ρ K†` with the channel acting on `target` (in the given order) and
/// the identity elsewhere.
///
/// Only dimension-preserving channels are accepted here, so the output keeps
/// the input layout.
pub fn apply_channel(rho: &DensityOperator, ch: &Channel, target: &[&str]) -> Result<DensityOperator> {
    let layout = rho.layout();
    let target_dim: usize = target
        .iter()
        .map(|t| {
            layout
                .factor_dim(t)
                .ok_or_else(|| Error::invalid(format!("unknown factor label '{t}'")))
        })
        .product::<Result<usize>>()?;
    if ch.in_dim != target_dim || ch.out_dim != target_dim {
        return Err(Error::invalid(format!(
            "channel maps {} -> {} but target factors span dimension {target_dim}",
            ch.in_dim, ch.out_dim
        )));
    }
    let d = rho.dim();
    let mut out = CMatrix::from_element(d, d, ZERO);
    for k in &ch.kraus {
        let full = embed(k, layout, target)?;
        out += &full * rho.matrix() * full.adjoint();
    }
    let result = DensityOperator::from_parts(out, layout.clone());
    let tr = result.matrix().trace().re;
    if (tr - 1.0).abs() > tol::COMPLETENESS {
        return Err(Error::integrity(format!("channel output has trace {tr}")));
    }
    Ok(result)
}
