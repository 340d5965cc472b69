//! Small statistical helpers for Born-rule checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square goodness-of-fit p-value of `counts` against `probs`.
///
/// Cells with zero expected probability are dropped; a nonzero count in such
/// a cell gives p = 0.
pub fn chi_square_p_value(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 1.0;
    }
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&n, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if n > 0 {
                return 0.0;
            }
            continue;
        }
        let expected = p * total as f64;
        stat += (n as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Pearson chi-square test of independence on a contingency table; returns
/// the p-value for "the two tables come from the same distribution".
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> f64 {
    let (ta, tb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    if ta == 0 || tb == 0 {
        return 1.0;
    }
    let total = (ta + tb) as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        for (obs, row) in [(x, ta), (y, tb)] {
            let e = col * row as f64 / total;
            stat += (obs as f64 - e).powi(2) / e;
        }
    }
    if cells < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}
