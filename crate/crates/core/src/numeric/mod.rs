//! Dense linear algebra, feasible domains and the mirror steps used by the solvers.

mod domain;
mod linalg;
pub mod lp;
mod matrix;
mod scalar;
mod step;
mod vector;

pub use domain::{BoxDomain, CappedOrthantDomain, SimplexDomain, SIMPLEX_TOL};
pub use linalg::{inf_operator_norm, invert, solve_linear};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;
pub use step::{capped_entropic_step, entropic_step, project_box};
pub use vector::DenseVector;
