use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tensor factor of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered tensor factorization of a finite-dimensional Hilbert space.
///
/// Basis indices are row-major: the first factor is the most significant
/// digit of the mixed-radix index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Factor>", into = "Vec<Factor>")]
pub struct SpaceLayout {
    factors: Vec<Factor>,
}

impl SpaceLayout {
    pub fn new<I, S>(factors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let factors: Vec<Factor> = factors
            .into_iter()
            .map(|(label, dim)| Factor {
                label: label.into(),
                dim,
            })
            .collect();
        Self::from_factors(factors)
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    fn from_factors(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("layout needs at least one factor"));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim == 0 {
                return Err(Error::invalid(format!("factor '{}' has dimension 0", f.label)));
            }
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::invalid(format!("duplicate factor label '{}'", f.label)));
            }
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Total dimension, the product of factor dimensions.
    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).product()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.factors.iter().map(|f| f.label.as_str())
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn factor_dim(&self, label: &str) -> Option<usize> {
        self.factors.iter().find(|f| f.label == label).map(|f| f.dim)
    }

    /// Concatenation `self ⊗ other`; labels must be disjoint.
    pub fn concat(&self, other: &SpaceLayout) -> Result<Self> {
        if let Some(clash) = other.labels().find(|l| self.contains(l)) {
            return Err(Error::invalid(format!("label collision on '{clash}'")));
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Ok(Self { factors })
    }

    /// The layout restricted to `labels`, in this layout's order.
    pub fn restrict(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            if !self.contains(l) {
                return Err(Error::invalid(format!("unknown factor label '{l}'")));
            }
        }
        let factors: Vec<Factor> = self
            .factors
            .iter()
            .filter(|f| labels.contains(&f.label.as_str()))
            .cloned()
            .collect();
        Self::from_factors(factors)
    }

    /// Index bookkeeping for acting on `targets` (in the given order) while
    /// leaving every other factor alone.
    pub(crate) fn split(&self, targets: &[&str]) -> Result<Split> {
        let mut target_pos = Vec::with_capacity(targets.len());
        for t in targets {
            let p = self
                .position(t)
                .ok_or_else(|| Error::invalid(format!("unknown factor label '{t}'")))?;
            if target_pos.contains(&p) {
                return Err(Error::invalid(format!("factor '{t}' listed twice")));
            }
            target_pos.push(p);
        }
        Ok(Split::new(self, &target_pos))
    }
}

impl TryFrom<Vec<Factor>> for SpaceLayout {
    type Error = Error;
    fn try_from(factors: Vec<Factor>) -> Result<Self> {
        Self::from_factors(factors)
    }
}

impl From<SpaceLayout> for Vec<Factor> {
    fn from(l: SpaceLayout) -> Self {
        l.factors
    }
}

/// Maps every full basis index to a (target index, rest index) pair.
///
/// `by_rest[r][t]` is the full index whose target digits encode `t` and whose
/// remaining digits encode `r`.
#[derive(Debug, Clone)]
pub(crate) struct Split {
    pub target_dim: usize,
    pub rest_dim: usize,
    pub by_rest: Vec<Vec<usize>>,
}

impl Split {
    fn new(layout: &SpaceLayout, target_pos: &[usize]) -> Self {
        let dims: Vec<usize> = layout.factors.iter().map(|f| f.dim).collect();
        let rest_pos: Vec<usize> = (0..dims.len()).filter(|p| !target_pos.contains(p)).collect();
        let target_dim: usize = target_pos.iter().map(|&p| dims[p]).product();
        let rest_dim: usize = rest_pos.iter().map(|&p| dims[p]).product();
        let total: usize = dims.iter().product();

        let mut by_rest = vec![vec![0usize; target_dim]; rest_dim];
        let mut digits = vec![0usize; dims.len()];
        for full in 0..total {
            let mut rem = full;
            for p in (0..dims.len()).rev() {
                digits[p] = rem % dims[p];
                rem /= dims[p];
            }
            let t = target_pos.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
            let r = rest_pos.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
            by_rest[r][t] = full;
        }
        Self {
            target_dim,
            rest_dim,
            by_rest,
        }
    }
}
