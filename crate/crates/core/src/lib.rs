//! Stochastic mirror descent solvers for box-simplex bilinear saddle problems and the
//! problems that reduce to them: mixing average-reward MDPs, discounted MDPs, constrained
//! MDPs, matrix games and l-infinity regression. Exact small-instance oracles ship alongside
//! so every estimator and bound can be checked numerically.

pub mod constrained;
pub mod error;
pub mod experiment;
pub mod game;
pub mod mdp;
pub mod mdp_smd;
pub mod numeric;
pub mod report;
pub mod saddle;
pub mod sampling;

pub use error::{Error, Result};
pub use numeric::Scalar;

/// Double-precision vector used by the MDP and game layers.
pub type Vector = numeric::DenseVector<f64>;
/// Double-precision row-major matrix used by the MDP and game layers.
pub type Matrix = numeric::DenseMatrix<f64>;
