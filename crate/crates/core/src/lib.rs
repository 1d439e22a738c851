//! Branch-flow OPF conic relaxation: model construction, an embedded
//! interior-point conic solver, exactness auditing and angle recovery.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common double-precision instantiations.

pub mod bfm;
pub mod error;
pub mod exactness;
pub mod experiments;
pub mod netmodel;
pub mod recovery;
pub mod scalar;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Network64 = netmodel::Network<f64>;
pub type Network32 = netmodel::Network<f32>;
pub type ConicProblem64 = bfm::ConicProblem<f64>;
pub type ConicProblem32 = bfm::ConicProblem<f32>;
pub type BfmSolution64 = bfm::BfmSolution<f64>;
pub type BfmSolution32 = bfm::BfmSolution<f32>;
