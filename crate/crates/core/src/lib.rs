//! Low-rank solvers for `A X + X B + b c^T = 0`: factored ADI, rational Krylov
//! projection, pseudo-H2 and Penzl shift selection, and dense oracles used to
//! check the equivalence and residual-orthogonality properties that tie them
//! together.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adi;
pub mod error;
pub mod galerkin;
pub mod krylov;
pub mod linalg;
pub mod mtx;
pub mod operator;
pub mod problem;
pub mod shifts;
pub mod verify;

pub use adi::{adi_dense, adi_lowrank, adi_lyapunov, adi_step_dense, AdiShiftPairs, LowRankApproximation};
pub use error::{Error, Result};
pub use krylov::{extended_krylov_basis, rational_krylov_basis, subspace_contains, OrthonormalBasis, ShiftSet};
pub use linalg::C64;
pub use operator::{LinearOperator, ShiftedSolver, Transposed};
pub use problem::{
    synth_stable_system, validate_problem, LtiSystem, LyapunovProblem, SylvesterProblem, SynthKind,
    ValidationReport,
};
