use super::layout::SpaceLayout;
use super::linalg::{is_unitary, CMatrix, CVector, C64, ZERO};
use super::DensityOperator;
use crate::error::{Error, Result};
use crate::tol;

/// A normalized pure state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    layout: SpaceLayout,
}

impl StateVector {
    /// Validated constructor: length must match the layout and the norm must
    /// be 1 within the construction tolerance.
    pub fn new(amplitudes: CVector, layout: SpaceLayout) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(Error::invalid(format!(
                "state has {} amplitudes but layout dimension is {}",
                amplitudes.len(),
                layout.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::CONSTRUCTION {
            return Err(Error::invalid(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { amplitudes, layout })
    }

    /// Normalizes `amplitudes` first. Fails on a zero vector.
    pub fn normalized(amplitudes: CVector, layout: SpaceLayout) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::new(amplitudes.unscale(norm), layout)
    }

    pub fn from_slice(amps: &[C64], layout: SpaceLayout) -> Result<Self> {
        Self::new(CVector::from_column_slice(amps), layout)
    }

    pub fn basis(layout: SpaceLayout, index: usize) -> Result<Self> {
        if index >= layout.dim() {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        let mut v = CVector::zeros(layout.dim());
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v, layout })
    }

    /// Single-factor state `label` with the given amplitudes (normalized here).
    pub fn single(label: &str, amps: &[C64]) -> Result<Self> {
        Self::normalized(
            CVector::from_column_slice(amps),
            SpaceLayout::single(label, amps.len())?,
        )
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            layout,
        })
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Equality of rays: global phase is ignored.
    pub fn same_ray(&self, other: &StateVector, tol: f64) -> bool {
        self.layout == other.layout && (1.0 - self.inner(other).norm()).abs() <= tol
    }

    /// `U|ψ⟩` for a unitary on the full space.
    pub fn evolve(&self, u: &CMatrix) -> Result<StateVector> {
        if u.nrows() != self.dim() || !is_unitary(u, tol::COMPLETENESS) {
            return Err(Error::invalid(
                "evolution operator is not a unitary of matching dimension",
            ));
        }
        let out = u * &self.amplitudes;
        Ok(Self {
            amplitudes: renormalize(out),
            layout: self.layout.clone(),
        })
    }

    /// Applies a unitary acting on `targets` (in that order) and the identity
    /// elsewhere.
    pub fn evolve_local(&self, u: &CMatrix, targets: &[&str]) -> Result<StateVector> {
        if !is_unitary(u, tol::COMPLETENESS) {
            return Err(Error::invalid("local evolution operator is not unitary"));
        }
        let out = self.apply_local(u, targets)?;
        Ok(Self {
            amplitudes: renormalize(out),
            layout: self.layout.clone(),
        })
    }

    /// `(op ⊗ I)|ψ⟩` without normalization.
    pub(crate) fn apply_local(&self, op: &CMatrix, targets: &[&str]) -> Result<CVector> {
        let split = self.layout.split(targets)?;
        if op.nrows() != split.target_dim || op.ncols() != split.target_dim {
            return Err(Error::invalid(format!(
                "operator is {}x{} but targets span dimension {}",
                op.nrows(),
                op.ncols(),
                split.target_dim
            )));
        }
        let mut out = CVector::zeros(self.dim());
        let mut local = CVector::zeros(split.target_dim);
        for idx in &split.by_rest {
            for (t, &full) in idx.iter().enumerate() {
                local[t] = self.amplitudes[full];
            }
            let mapped = op * &local;
            for (t, &full) in idx.iter().enumerate() {
                out[full] = mapped[t];
            }
        }
        Ok(out)
    }

    /// Projects `factor` onto `vector` (need not be normalized).
    ///
    /// Returns the Born probability and, when it is nonzero, the conditioned
    /// state.
    pub fn project(&self, factor: &str, vector: &CVector) -> Result<(f64, Option<StateVector>)> {
        let n = vector.norm();
        if n == 0.0 {
            return Err(Error::invalid("projection onto the zero vector"));
        }
        let v = vector.unscale(n);
        let proj = &v * v.adjoint();
        let out = self.apply_local(&proj, &[factor])?;
        let p = out.norm_squared();
        if p <= 0.0 {
            return Ok((0.0, None));
        }
        let state = Self {
            amplitudes: out.unscale(p.sqrt()),
            layout: self.layout.clone(),
        };
        Ok((p, Some(state)))
    }

    /// Computational-basis marginal distribution of one factor.
    pub fn marginal(&self, factor: &str) -> Result<Vec<f64>> {
        let split = self.layout.split(&[factor])?;
        let mut probs = vec![0.0; split.target_dim];
        for idx in &split.by_rest {
            for (t, &full) in idx.iter().enumerate() {
                probs[t] += self.amplitudes[full].norm_sqr();
            }
        }
        Ok(probs)
    }

    /// Matrix `M[t][r]` of amplitudes with target digits as rows.
    pub(crate) fn as_matrix(&self, targets: &[&str]) -> Result<CMatrix> {
        let split = self.layout.split(targets)?;
        let mut m = CMatrix::from_element(split.target_dim, split.rest_dim, ZERO);
        for (r, idx) in split.by_rest.iter().enumerate() {
            for (t, &full) in idx.iter().enumerate() {
                m[(t, r)] = self.amplitudes[full];
            }
        }
        Ok(m)
    }

    /// Reduced density operator on `keep`, computed without forming the full
    /// projector.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        if keep.is_empty() {
            return Err(Error::invalid("partial trace must keep at least one factor"));
        }
        let sub = self.layout.restrict(keep)?;
        let order: Vec<&str> = sub.labels().collect();
        let m = self.as_matrix(&order)?;
        DensityOperator::new(&m * m.adjoint(), sub)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }

    /// Rebuilds a state with the same layout from raw amplitudes that are
    /// known to be normalized up to rounding.
    pub(crate) fn with_amplitudes(&self, amplitudes: CVector) -> Result<StateVector> {
        Self::normalized(amplitudes, self.layout.clone())
    }
}

fn renormalize(v: CVector) -> CVector {
    let n = v.norm();
    if n > 0.0 {
        v.unscale(n)
    } else {
        v
    }
}
