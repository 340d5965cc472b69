use std::f64::consts::FRAC_PI_2;

use determinacy::decomodels::{spin_env_evolve, von_neumann_couple, SpinEnvironment};
use determinacy::differentiation::{
    classify_process, degree_of_differentiation, environment_overlaps, ProcessKind, StabilityParams,
};
use determinacy::hilbert::linalg::c;
use determinacy::hilbert::random::{random_state, random_unitary};
use determinacy::hilbert::{Observable, Pauli, SpaceLayout, StateVector, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn joint(ds: usize, de: usize) -> SpaceLayout {
    SpaceLayout::new([("S", ds), ("E", de)]).unwrap()
}

/// `(|↑⟩|0⟩ + |↓⟩(cos θ|0⟩ + sin θ|1⟩))/√2`, so `|⟨E_↑|E_↓⟩| = cos θ`.
fn engineered(theta: f64) -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    StateVector::from_slice(
        &[c(h, 0.0), c(0.0, 0.0), c(h * theta.cos(), 0.0), c(h * theta.sin(), 0.0)],
        joint(2, 2),
    )
    .unwrap()
}

#[test]
fn monotone_in_engineered_overlap() {
    let z = Observable::pauli("S", Pauli::Z).unwrap();
    let mut last = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..10 {
        let st = engineered(FRAC_PI_2 * k as f64 / 9.0);
        let overlap = environment_overlaps(&st, "S", &z, 0.0).unwrap().get(0, 1).norm();
        let d = degree_of_differentiation(&st.reduced(&["S"]).unwrap()).unwrap();
        assert!(
            d >= last.0 - 1e-12 && overlap <= last.1 + 1e-12,
            "step {k}: {d} {overlap}"
        );
        last = (d, overlap);
    }
    assert!(last.0 > 1.0 - 1e-9 && last.1 < 1e-9);
    let start = degree_of_differentiation(&engineered(0.0).reduced(&["S"]).unwrap()).unwrap();
    assert!(start.abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn environment_unitaries_leave_d_star_alone(seed: u64, ds in 2usize..4, de in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&joint(ds, de), &mut rng);
        let moved = st.evolve_local(&random_unitary(de, &mut rng), &["E"]).unwrap();
        let a = degree_of_differentiation(&st.reduced(&["S"]).unwrap()).unwrap();
        let b = degree_of_differentiation(&moved.reduced(&["S"]).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_records_of_balanced_qubit_give_one(phase in 0.0..6.3f64, seed: u64, de in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::single("S", &[c(h, 0.0), C64::from_polar(h, phase)]).unwrap();
        let ready = random_state(&SpaceLayout::single("E", de).unwrap(), &mut rng);
        let coupled = von_neumann_couple(&s, &ready).unwrap();
        let d = degree_of_differentiation(&coupled.reduced(&["S"]).unwrap()).unwrap();
        prop_assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlaps_are_bounded(seed: u64, ds in 2usize..4, de in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&joint(ds, de), &mut rng);
        let pointer = Observable::computational("S", ds).unwrap();
        let o = environment_overlaps(&st, "S", &pointer, 0.0).unwrap();
        for i in 0..ds {
            for l in 0..ds {
                prop_assert!(o.get(i, l).norm() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn small_environments_are_never_quasi_irreversible(seed: u64, n in 1usize..8, threshold in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = SpinEnvironment::random(n, &mut rng).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = StateVector::single("S", &[c(h, 0.0), c(h, 0.0)]).unwrap();
        let z = Observable::pauli("S", Pauli::Z).unwrap();
        let span = rng.random_range(0.5..5.0);
        let series: Vec<_> = (0..40)
            .map(|k| {
                let t = span * k as f64 / 39.0;
                environment_overlaps(&spin_env_evolve(&s, &env, t).unwrap(), "S", &z, t).unwrap()
            })
            .collect();
        let params = StabilityParams { eps: 0.5, window: 0.25, size_threshold: threshold };
        let size = rng.random_range(0..threshold);
        let class = classify_process(&series, size, &params).unwrap();
        prop_assert_eq!(class.kind, ProcessKind::Reversible);
    }
}
