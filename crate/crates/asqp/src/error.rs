use thiserror::Error;

/// Errors surfaced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A matrix argument contains NaN or infinite entries.
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    /// A pseudoinverse solve was requested against an empty working matrix.
    #[error("no active rows in the working matrix")]
    NoActiveRows,
    /// Cholesky factorization hit a nonpositive pivot.
    #[error("matrix is not positive definite: pivot {pivot:.6e} at row {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The stacked working matrix lost full row rank.
    #[error("rank-deficient working set: {0}")]
    RankDeficientWorkingSet(String),
    #[error("infeasible start: {0}")]
    InfeasibleStart(String),
    /// The working matrix has full column rank, so its null space is trivial.
    #[error("empty null space: the working matrix has full column rank")]
    EmptyNullSpace,
    #[error("oracle inconclusive: no candidate active set satisfies the optimality conditions")]
    OracleInconclusive,
    #[error("generator spec rejected: {0}")]
    InvalidGeneratorSpec(String),
    /// An iterative kernel failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
