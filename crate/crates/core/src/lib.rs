//! Finite-dimensional simulation of how determinate values arise in quantum
//! theories.
//!
//! The crate computes degrees of differentiation from decoherence dynamics,
//! propagates determinacy through typed interaction graphs under pluggable
//! theory rules (spontaneous collapse, branching, relational facts and
//! determination-capacity chains) and evaluates classical and quantum causal
//! models on Bell scenarios.
//!
//! Monte-Carlo trials and parameter sweeps run on rayon when the `parallel`
//! feature is enabled (the default) and sequentially otherwise; see
//! [`exec`].

pub mod causal;
pub mod decomodels;
pub mod differentiation;
pub mod error;
pub mod events;
pub mod exec;
pub mod hilbert;
pub mod scenarios;
pub mod stats;
pub mod structures;
pub mod theories;
pub mod tol;

pub use error::{Error, Result};
