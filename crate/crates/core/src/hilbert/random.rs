//! Seeded random states, unitaries, channels and POVMs for property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{hermitian_inv_sqrt, CMatrix, CVector, C64};
use super::{Channel, DensityOperator, Povm, SpaceLayout, StateVector};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(layout: &SpaceLayout, rng: &mut R) -> StateVector {
    let v = CVector::from_fn(layout.dim(), |_, _| gaussian(rng));
    StateVector::normalized(v, layout.clone()).expect("gaussian vector is nonzero")
}

/// Random mixed state of the given rank (Ginibre ensemble).
pub fn random_density<R: Rng + ?Sized>(layout: &SpaceLayout, rank: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(layout.dim(), rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(m.unscale(tr), layout.clone()).expect("Ginibre matrix is a valid state")
}

/// Haar-random unitary via the polar part of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = ginibre(dim, dim, rng);
    let gram = g.adjoint() * &g;
    g * hermitian_inv_sqrt(&gram)
}

/// Random channel with `n_kraus` operators, from a random isometry.
pub fn random_channel<R: Rng + ?Sized>(dim: usize, n_kraus: usize, rng: &mut R) -> Channel {
    let n = n_kraus.max(1);
    let g = ginibre(dim * n, dim, rng);
    let gram = g.adjoint() * &g;
    let iso = g * hermitian_inv_sqrt(&gram);
    let kraus = (0..n).map(|k| iso.rows(k * dim, dim).into_owned()).collect();
    Channel::new(kraus).expect("isometry blocks are complete")
}

/// Random `n`-outcome POVM, `E_i = S^{-1/2} A_i S^{-1/2}` with `S = Σ A_i`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, n: usize, rng: &mut R) -> Povm {
    let parts: Vec<CMatrix> = (0..n.max(1))
        .map(|_| {
            let g = ginibre(dim, dim, rng);
            &g * g.adjoint()
        })
        .collect();
    let total = parts.iter().fold(CMatrix::zeros(dim, dim), |acc, p| acc + p);
    let norm = hermitian_inv_sqrt(&total);
    let elements = parts
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let e = &norm * a * &norm;
            (i.to_string(), (&e + e.adjoint()).scale(0.5))
        })
        .collect();
    Povm::new(elements).expect("normalized effects form a POVM")
}

#[cfg(test)]
mod tests {
    use super::super::linalg::is_unitary;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_satisfy_their_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..6 {
            assert!(is_unitary(&random_unitary(d, &mut rng), 1e-10));
            let ch = random_channel(d, 3, &mut rng);
            assert_eq!(ch.kraus().len(), 3);
            let p = random_povm(d, 4, &mut rng);
            assert_eq!(p.len(), 4);
        }
    }
}
