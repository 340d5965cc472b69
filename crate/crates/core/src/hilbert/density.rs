use super::layout::SpaceLayout;
use super::linalg::{hermitian_eigenvalues, is_hermitian, is_unitary, kron, max_abs_diff, trace, CMatrix, ZERO};
use super::StateVector;
use crate::error::{Error, Result};
use crate::tol;

/// A mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    layout: SpaceLayout,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, layout: SpaceLayout) -> Result<Self> {
        let d = layout.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::invalid(format!(
                "density matrix is {}x{} but layout dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_hermitian(&matrix, tol::CONSTRUCTION) {
            return Err(Error::invalid("density matrix is not Hermitian"));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > tol::CONSTRUCTION || tr.im.abs() > tol::CONSTRUCTION {
            return Err(Error::invalid(format!("density matrix trace is {tr}, expected 1")));
        }
        if let Some(&min) = hermitian_eigenvalues(&matrix).last() {
            if min < -tol::CONSTRUCTION {
                return Err(Error::invalid(format!("density matrix has eigenvalue {min}")));
            }
        }
        Ok(Self { matrix, layout })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        Self {
            matrix: a * a.adjoint(),
            layout: state.layout().clone(),
        }
    }

    pub fn maximally_mixed(layout: SpaceLayout) -> Self {
        let d = layout.dim();
        Self {
            matrix: CMatrix::identity(d, d).unscale(d as f64),
            layout,
        }
    }

    /// Diagonal state with the given weights (normalized here).
    pub fn diagonal(weights: &[f64], layout: SpaceLayout) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || !(total > 0.0) {
            return Err(Error::invalid("diagonal weights must be nonnegative with positive sum"));
        }
        let mut m = CMatrix::from_element(weights.len(), weights.len(), ZERO);
        for (i, w) in weights.iter().enumerate() {
            m[(i, i)] = (w / total).into();
        }
        Self::new(m, layout)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            layout,
        })
    }

    /// Traces out every factor not named in `keep`.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::invalid("partial trace must keep at least one factor"));
        }
        let sub = self.layout.restrict(keep)?;
        let order: Vec<&str> = sub.labels().collect();
        let split = self.layout.split(&order)?;
        let mut out = CMatrix::from_element(split.target_dim, split.target_dim, ZERO);
        for idx in &split.by_rest {
            for (a, &fa) in idx.iter().enumerate() {
                for (b, &fb) in idx.iter().enumerate() {
                    out[(a, b)] += self.matrix[(fa, fb)];
                }
            }
        }
        Ok(Self {
            matrix: out,
            layout: sub,
        })
    }

    /// `U ρ U†` for a unitary on the full space.
    pub fn evolve(&self, u: &CMatrix) -> Result<DensityOperator> {
        if u.nrows() != self.dim() || !is_unitary(u, tol::COMPLETENESS) {
            return Err(Error::invalid(
                "evolution operator is not a unitary of matching dimension",
            ));
        }
        Ok(Self {
            matrix: hermitize(u * &self.matrix * u.adjoint()),
            layout: self.layout.clone(),
        })
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// `S(ρ) = −tr(ρ ln ρ)` in nats.
    pub fn von_neumann_entropy(&self) -> f64 {
        entropy_of_spectrum(&self.eigenvalues())
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Largest elementwise deviation from `other` (layouts must match).
    pub fn max_deviation(&self, other: &DensityOperator) -> Result<f64> {
        if self.layout != other.layout {
            return Err(Error::invalid("layouts differ"));
        }
        Ok(max_abs_diff(&self.matrix, &other.matrix))
    }

    /// Crate-internal constructor for matrices that are valid by construction
    /// up to rounding.
    pub(crate) fn from_parts(matrix: CMatrix, layout: SpaceLayout) -> Self {
        Self {
            matrix: hermitize(matrix),
            layout,
        }
    }
}

/// Entropy in nats of a probability spectrum; entries below the cutoff
/// (including small negative rounding noise) contribute zero.
pub fn entropy_of_spectrum(values: &[f64]) -> f64 {
    let s: f64 = values
        .iter()
        .filter(|&&l| l > tol::ENTROPY_CUTOFF)
        .map(|&l| -l * l.ln())
        .sum();
    s.max(0.0)
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::super::linalg::{c, identity, CVector, ONE};
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn bell_phi_plus() -> StateVector {
        let l = SpaceLayout::new([("a", 2), ("b", 2)]).unwrap();
        let s = FRAC_1_SQRT_2;
        StateVector::from_slice(&[c(s, 0.0), ZERO, ZERO, c(s, 0.0)], l).unwrap()
    }

    #[test]
    fn marginal_of_bell_state_is_maximally_mixed() {
        let rho = bell_phi_plus().to_density();
        let a = rho.partial_trace(&["a"]).unwrap();
        let expect = identity(2).unscale(2.0);
        assert!(max_abs_diff(a.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn keeping_everything_is_identity() {
        let rho = bell_phi_plus().to_density();
        let same = rho.partial_trace(&["a", "b"]).unwrap();
        assert!(rho.max_deviation(&same).unwrap() < 1e-15);
    }

    #[test]
    fn unknown_label_is_rejected() {
        let rho = bell_phi_plus().to_density();
        assert!(rho.partial_trace(&["z"]).is_err());
    }

    #[test]
    fn reduced_from_pure_matches_partial_trace() {
        let psi = bell_phi_plus();
        let a = psi.reduced(&["b"]).unwrap();
        let b = psi.to_density().partial_trace(&["b"]).unwrap();
        assert!(a.max_deviation(&b).unwrap() < 1e-14);
    }

    #[test]
    fn entropy_anchors() {
        let l = SpaceLayout::single("q", 2).unwrap();
        let pure = StateVector::basis(l.clone(), 0).unwrap().to_density();
        assert!(pure.von_neumann_entropy().abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(l.clone());
        assert!((mixed.von_neumann_entropy() - LN_2).abs() < 1e-12);
        // independent scalar evaluation of -(3/4)ln(3/4) - (1/4)ln(1/4)
        let expect = -(0.75f64) * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        let rho = DensityOperator::diagonal(&[0.75, 0.25], l).unwrap();
        assert!((rho.von_neumann_entropy() - expect).abs() < 1e-12);
    }

    #[test]
    fn invalid_matrices_are_rejected() {
        let l = SpaceLayout::single("q", 2).unwrap();
        // trace 2
        assert!(DensityOperator::new(identity(2), l.clone()).is_err());
        // negative eigenvalue
        let m = CMatrix::from_row_slice(2, 2, &[c(1.5, 0.0), ZERO, ZERO, c(-0.5, 0.0)]);
        assert!(DensityOperator::new(m, l.clone()).is_err());
        // non-Hermitian
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), ONE, ZERO, c(0.5, 0.0)]);
        assert!(DensityOperator::new(m, l).is_err());
    }

    #[test]
    fn tensor_then_trace_recovers_factor() {
        let la = SpaceLayout::single("a", 2).unwrap();
        let lb = SpaceLayout::single("b", 3).unwrap();
        let a = DensityOperator::diagonal(&[0.3, 0.7], la).unwrap();
        let b = StateVector::normalized(CVector::from_element(3, ONE), lb)
            .unwrap()
            .to_density();
        let ab = a.tensor(&b).unwrap();
        assert!(ab.partial_trace(&["a"]).unwrap().max_deviation(&a).unwrap() < 1e-12);
    }
}
