//! Complex linear algebra on small composite Hilbert spaces: states,
//! operators, tensor structure, channels and measurements.
//!
//! Everything here is immutable after construction and `Send + Sync`.

mod channel;
mod density;
mod layout;
pub mod linalg;
mod observable;
mod povm;
pub mod random;
mod state;

pub use channel::{apply_channel, Channel};
pub use density::{entropy_of_spectrum, DensityOperator};
pub use layout::{Factor, SpaceLayout};
pub use linalg::{CMatrix, CVector, C64};
pub use observable::{embed, Observable, Pauli};
pub use povm::{povm_probabilities, Povm};
pub use state::StateVector;

/// Entropy `S(ρ) = −tr(ρ ln ρ)` in nats.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    rho.von_neumann_entropy()
}

/// Kronecker product of two operators, the `Observable` case of `tensor`.
pub fn tensor_observables(a: &Observable, b: &Observable) -> crate::Result<Observable> {
    let layout = a.layout().concat(b.layout())?;
    Observable::new(linalg::kron(a.matrix(), b.matrix()), layout)
}
