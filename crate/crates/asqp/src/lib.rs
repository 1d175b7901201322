//! Dense active-set solver for convex quadratic programs
//!
//! ```text
//! minimize    0.5 * x' Q x + q' x
//! subject to  A x  = b
//!             G x <= h
//! ```
//!
//! with `Q` symmetric positive definite. Three interchangeable direction
//! schemes drive the active-set iteration: a full KKT solve, a projection
//! onto the null space of the working matrix, and a reduced sphere step in
//! the whitened variable.

pub mod bench;
pub mod directions;
pub mod error;
pub mod linalg;
pub mod model;
pub mod solver;

pub use error::Error;
pub use model::QpProblem;
pub use solver::{solve, Scheme, SolveOutcome, SolveStatus, SolverConfig};
