//! Online Newton with Nesterov-accelerated sketch-and-project inner solves,
//! plus the online covariance estimator and limiting-covariance oracles used
//! for inference.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment harness uses.

pub mod accel;
pub mod error;
pub mod harness;
pub mod inference;
pub mod linalg;
pub mod models;
pub mod nasketch;
pub mod newton;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod sketching;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat = linalg::Matrix<f64>;
pub type SymMat = linalg::SymMatrix<f64>;
pub type Params = accel::SolverParams<f64>;
