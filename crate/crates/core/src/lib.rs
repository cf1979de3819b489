//! Gauge-invariant tensor-network simulator for the (1+1)-d SU(2) quantum
//! link model at finite matter density.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: the gauge-invariant local bases, Gauss generators, and the
//!   nearest-neighbor Hamiltonian gates, all built from an explicit fermionic
//!   Fock-space representation.
//! - [`symtensor`]: charge-labelled block-sparse tensors with the contraction,
//!   QR and truncated SVD kernels used by the MPS.
//! - [`mps`]: open-boundary symmetric matrix product states in a fixed matter
//!   sector, with gate application and measurements.
//! - [`tebd`]: imaginary-time TEBD annealing for ground states.
//! - [`ed`]: exact diagonalization of the constrained model on small chains.
//! - [`perturbation`]: the small-coupling effective Heisenberg description.
//! - [`analysis`]: entropy fits, order parameters, correlation lengths and
//!   transition locators.
//! - [`record`]: the measurement record shared by the analysis and the CLI.
//!
//! With the `parallel` feature (on by default) per-block kernels, seed
//! searches and Hamiltonian assembly run on the rayon pool. Without it the
//! same code runs sequentially; results are identical either way.

#[macro_use]
mod par;

pub mod analysis;
pub mod ed;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod perturbation;
pub mod record;
pub mod sparse;
pub mod symtensor;
pub mod tebd;

pub use error::{Error, Result};
pub use model::{ModelParams, SiteKind};
