//! Sequential single-photon scattering in waveguide QED and the photonic
//! tensor-network states it produces.
//!
//! A photon scattering off a multi-level atom is described by a unitary
//! S-matrix coupling the photon's internal state to the atom's ground states.
//! Scattering photons one after another, with atom rotations in between,
//! builds a matrix product state whose bond index is the atom; scattering a
//! photon again later adds extra bonds and yields PEPS on arbitrary graphs.
//!
//! Every tensor-network construction here is checked against [`protocol`],
//! which runs the same instruction list on the full photon⊗atom state vector.

pub mod atom;
pub mod cluster;
pub mod error;
pub mod format;
pub mod graph;
pub mod linalg;
pub mod mps;
pub mod parallel;
pub mod peps;
pub mod protocol;
pub mod random;
pub mod scheduler;
pub mod tensor;
pub mod verify;

pub use num_complex::Complex64 as C64;

pub use atom::{AtomModel, FourLevelParams};
pub use error::{Error, Result};
pub use graph::Graph;
pub use mps::Mps;
pub use parallel::Exec;
pub use peps::Peps;
pub use protocol::{Instruction, PhotonInput, Protocol};
pub use tensor::Tensor;
