//! Rank sweeps over the three shift strategies, CSV output and the theorem checks.

// `!(x > 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;
pub mod theorems;

pub use config::{BenchConfig, Method, Overrides, ProblemSource};
pub use run::{emit_shifts, run_benchmark, BenchReport, BenchRow, ErrorMode};
pub use theorems::{verify_theorems, CheckLine, Status, TheoremReport};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] adirk::Error),
    #[error("{0} theorem check(s) failed")]
    TheoremFailure(usize),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Io(_) => 1,
            BenchError::Numerical(_) => 2,
            BenchError::TheoremFailure(_) => 3,
        }
    }
}
