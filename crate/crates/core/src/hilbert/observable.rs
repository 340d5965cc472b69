use super::layout::SpaceLayout;
use super::linalg::{
    c, hermitian_eigen, is_hermitian, max_abs_diff, pauli_x, pauli_y, pauli_z, CMatrix, CVector, ZERO,
};
use crate::error::{Error, Result};
use crate::tol;

/// Hermitian operator with a cached eigendecomposition.
///
/// Eigenvalues are sorted descending; column `i` of `eigenvectors` belongs to
/// eigenvalue `i`. For a spin observable index 0 is therefore "up".
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    matrix: CMatrix,
    layout: SpaceLayout,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
}

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => CMatrix::identity(2, 2),
            Pauli::X => pauli_x(),
            Pauli::Y => pauli_y(),
            Pauli::Z => pauli_z(),
        }
    }

    pub fn from_char(ch: char) -> Option<Self> {
        match ch.to_ascii_lowercase() {
            'i' => Some(Pauli::I),
            'x' => Some(Pauli::X),
            'y' => Some(Pauli::Y),
            'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl Observable {
    pub fn new(matrix: CMatrix, layout: SpaceLayout) -> Result<Self> {
        if matrix.nrows() != layout.dim() || matrix.ncols() != layout.dim() {
            return Err(Error::invalid("observable dimension does not match its layout"));
        }
        if !is_hermitian(&matrix, tol::CONSTRUCTION) {
            return Err(Error::invalid("observable is not Hermitian"));
        }
        let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
        Ok(Self {
            matrix,
            layout,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Builds `Σ λ_i |v_i⟩⟨v_i|` from an explicit orthonormal eigenbasis.
    pub fn from_eigenbasis(eigenvalues: Vec<f64>, eigenvectors: CMatrix, layout: SpaceLayout) -> Result<Self> {
        let d = layout.dim();
        if eigenvectors.nrows() != d || eigenvectors.ncols() != d || eigenvalues.len() != d {
            return Err(Error::invalid("eigenbasis does not match layout dimension"));
        }
        let gram = eigenvectors.adjoint() * &eigenvectors;
        if max_abs_diff(&gram, &CMatrix::identity(d, d)) > tol::CONSTRUCTION {
            return Err(Error::invalid("eigenvectors are not orthonormal"));
        }
        let mut matrix = CMatrix::from_element(d, d, ZERO);
        for (i, &l) in eigenvalues.iter().enumerate() {
            let v = eigenvectors.column(i);
            matrix += (v * v.adjoint()).scale(l);
        }
        Ok(Self {
            matrix,
            layout,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Pauli operator on a single qubit factor, with the computational basis
    /// (Z) or the standard ± states (X, Y) as exact eigenvectors.
    pub fn pauli(label: &str, axis: Pauli) -> Result<Self> {
        let layout = SpaceLayout::single(label, 2)?;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vecs = match axis {
            Pauli::I => return Self::new(CMatrix::identity(2, 2), layout),
            Pauli::Z => CMatrix::identity(2, 2),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(0.0, s), c(0.0, -s)]),
        };
        Self::from_eigenbasis(vec![1.0, -1.0], vecs, layout)
    }

    /// Spin component along angle `theta` (radians) in the x–z plane:
    /// `cos θ σ_z + sin θ σ_x`.
    pub fn spin_along(label: &str, theta: f64) -> Result<Self> {
        let (ch, sh) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let vecs = CMatrix::from_row_slice(2, 2, &[c(ch, 0.0), c(-sh, 0.0), c(sh, 0.0), c(ch, 0.0)]);
        Self::from_eigenbasis(vec![1.0, -1.0], vecs, SpaceLayout::single(label, 2)?)
    }

    /// Lattice position `x = 0, 1, …, n−1` on an `n`-site factor.
    pub fn position(label: &str, sites: usize) -> Result<Self> {
        let values: Vec<f64> = (0..sites).map(|x| x as f64).collect();
        Self::from_eigenbasis(
            values,
            CMatrix::identity(sites, sites),
            SpaceLayout::single(label, sites)?,
        )
    }

    /// Computational-basis observable with eigenvalue `i` on `|i⟩`.
    pub fn computational(label: &str, dim: usize) -> Result<Self> {
        Self::position(label, dim)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, i: usize) -> CVector {
        self.eigenvectors.column(i).into_owned()
    }

    /// Label of the single factor this observable acts on, if it acts on one.
    pub fn single_factor(&self) -> Option<&str> {
        match self.layout.factors() {
            [f] => Some(f.label.as_str()),
            _ => None,
        }
    }

    /// Matrix of this observable on `joint`, tensored with identity on every
    /// factor it does not act on.
    pub fn lifted_matrix(&self, joint: &SpaceLayout) -> Result<CMatrix> {
        if *joint == self.layout {
            return Ok(self.matrix.clone());
        }
        let targets: Vec<&str> = self.layout.labels().collect();
        for f in self.layout.factors() {
            if joint.factor_dim(&f.label) != Some(f.dim) {
                return Err(Error::invalid(format!(
                    "factor '{}' missing from joint layout or has a different dimension",
                    f.label
                )));
            }
        }
        embed(&self.matrix, joint, &targets)
    }

    /// Spectral projectors grouped by distinct eigenvalue.
    pub fn projectors(&self) -> Vec<(f64, CMatrix)> {
        let mut out: Vec<(f64, CMatrix)> = Vec::new();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(i);
            let p = v * v.adjoint();
            match out.last_mut() {
                Some((last, acc)) if (*last - l).abs() <= tol::COMPLETENESS => *acc += p,
                _ => out.push((l, p)),
            }
        }
        out
    }
}

/// `op` acting on `targets` (in the given order) and the identity elsewhere,
/// as a dense matrix on `layout`.
pub fn embed(op: &CMatrix, layout: &SpaceLayout, targets: &[&str]) -> Result<CMatrix> {
    let split = layout.split(targets)?;
    if op.nrows() != split.target_dim || op.ncols() != split.target_dim {
        return Err(Error::invalid("operator dimension does not match its target factors"));
    }
    let d = layout.dim();
    let mut full = CMatrix::from_element(d, d, ZERO);
    for idx in &split.by_rest {
        for (a, &fa) in idx.iter().enumerate() {
            for (b, &fb) in idx.iter().enumerate() {
                full[(fa, fb)] = op[(a, b)];
            }
        }
    }
    Ok(full)
}
