use super::linalg::{hermitian_eigenvalues, is_hermitian, max_abs_diff, trace, CMatrix, ZERO};
use super::{DensityOperator, Observable};
use crate::error::{Error, Result};
use crate::tol;

/// Positive operator-valued measure: labelled PSD effects summing to identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<(String, CMatrix)>,
    dim: usize,
}

impl Povm {
    pub fn new(elements: Vec<(String, CMatrix)>) -> Result<Self> {
        let dim = elements
            .first()
            .map(|(_, m)| m.nrows())
            .ok_or_else(|| Error::invalid("POVM needs at least one element"))?;
        let mut sum = CMatrix::from_element(dim, dim, ZERO);
        for (label, e) in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::invalid(format!("POVM element '{label}' has the wrong shape")));
            }
            if !is_hermitian(e, tol::CONSTRUCTION) {
                return Err(Error::invalid(format!("POVM element '{label}' is not Hermitian")));
            }
            if hermitian_eigenvalues(e).last().copied().unwrap_or(0.0) < -tol::CONSTRUCTION {
                return Err(Error::invalid(format!("POVM element '{label}' is not positive")));
            }
            sum += e;
        }
        if max_abs_diff(&sum, &CMatrix::identity(dim, dim)) > tol::COMPLETENESS {
            return Err(Error::invalid("POVM elements do not sum to the identity"));
        }
        Ok(Self { elements, dim })
    }

    /// Projective measurement of an observable; outcome `i` is the `i`-th
    /// distinct eigenvalue in descending order.
    pub fn projective(obs: &Observable) -> Result<Self> {
        let elements = obs.projectors().into_iter().map(|(l, p)| (format!("{l}"), p)).collect();
        Self::new(elements)
    }

    pub fn elements(&self) -> &[(String, CMatrix)] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn effect(&self, i: usize) -> Option<&CMatrix> {
        self.elements.get(i).map(|(_, m)| m)
    }
}

/// Born probabilities `p_i = tr(E_i ρ)`, clamped to `[0, 1]`.
pub fn povm_probabilities(rho: &DensityOperator, povm: &Povm) -> Result<Vec<f64>> {
    if rho.dim() != povm.dim() {
        return Err(Error::invalid(format!(
            "POVM acts on dimension {} but state has dimension {}",
            povm.dim(),
            rho.dim()
        )));
    }
    let probs: Vec<f64> = povm
        .elements()
        .iter()
        .map(|(_, e)| trace(&(e * rho.matrix())).re.clamp(0.0, 1.0))
        .collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > tol::COMPLETENESS {
        return Err(Error::integrity(format!("POVM probabilities sum to {total}")));
    }
    Ok(probs)
}
