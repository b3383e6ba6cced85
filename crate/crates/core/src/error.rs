use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    /// A shifted operator `(shift I - A)` is singular: the shift sits on the spectrum.
    #[error("shift collision: shifted system is singular at shift {shift}")]
    ShiftCollision { shift: Complex64 },

    #[error("transfer function evaluated at a pole: s = {s}")]
    Pole { s: Complex64 },

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("degenerate subspace: generating vector is zero")]
    DegenerateSubspace,

    /// `lambda_i(A_r) + lambda_j(B_r)` vanished during the triangular solve.
    #[error("spectral collision between eigenvalue {i} of A and eigenvalue {j} of B (separation {separation:e})")]
    SpectralCollision { i: usize, j: usize, separation: f64 },

    #[error("Sylvester equation is not uniquely solvable: {0}")]
    Unsolvable(String),

    #[error("oracle too large: n*m = {size} exceeds cap {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("eigenvalue iteration failed to converge: {0}")]
    NoConvergence(String),

    #[error("matrix market line {line}: {message}")]
    MatrixMarket { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
