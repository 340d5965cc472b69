//! Trial execution: one seeded stream per trial, run on rayon or
//! sequentially.
//!
//! Each trial draws from its own ChaCha8 stream (`seed`, stream = trial
//! index), so results do not depend on scheduling and the two modes agree
//! exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// rayon when the `parallel` feature is on, otherwise sequential.
    #[default]
    Parallel,
    Sequential,
}

/// Generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// `f(i)` for `i in 0..n`, in index order.
pub fn map_indexed<T, F>(mode: Mode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Mode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `trials` seeded trials and collects them in trial order; the first
/// error by trial index wins.
pub fn run_trials<T, F>(mode: Mode, seed: u64, trials: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    map_indexed(mode, trials, |i| f(i, &mut trial_rng(seed, i as u64)))
        .into_iter()
        .collect()
}
