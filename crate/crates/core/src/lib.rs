//! Simulation and training of parameterized quantum circuits on a dense
//! statevector: data encoding, layered Ising-evolution ansatz,
//! parameter-shift gradients, BFGS training and experiment harness.

mod batch;
mod error;
pub mod ansatz;
pub mod baseline;
pub mod dynamics;
pub mod encoding;
pub mod experiment;
pub mod grad;
pub mod hamiltonian;
pub mod learn;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};
