//! Numeric tolerances shared across the crate.
//!
//! Three tiers: construction invariants are the tightest, channel and POVM
//! completeness sit one order looser, and assertions on derived quantities
//! (used mostly by tests and the verify suites) are looser again.

/// Hermiticity, normalization and trace checks at construction time.
pub const CONSTRUCTION: f64 = 1e-10;

/// Kraus completeness, POVM completeness, unitarity.
pub const COMPLETENESS: f64 = 1e-9;

/// Comparisons of derived numeric results.
pub const ASSERTION: f64 = 1e-8;

/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Pointer components with amplitude below this are treated as absent.
pub const ABSENT_AMPLITUDE: f64 = 1e-12;

/// Worlds lighter than this are pruned from branch bookkeeping.
pub const WORLD_PRUNE: f64 = 1e-12;
