use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::solvers::SolveReport;

fn d_hint(d: f64) -> String {
    if d.is_finite() {
        format!(" with d ≈ {d:.4}")
    } else {
        String::new()
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid resolution: need at least 2 cells per axis, got {0}")]
    InvalidResolution(usize),

    #[error("invalid weight exponent m = {0}")]
    InvalidWeight(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },

    #[error("{context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("weight m = {m} does not satisfy m > 8B = {threshold}")]
    Threshold { m: f64, threshold: f64 },

    #[error("an assumption probe covering radius {rho} is required before choosing a weight")]
    MustProbeFirst { rho: f64 },

    #[error(
        "iteration is not contracting (observed ratio {ratio:.4} at m = {m}); \
         increase m, contraction needs m > 2√d{}",
        d_hint(*.d)
    )]
    Divergence {
        ratio: f64,
        m: f64,
        d: f64,
        report: Box<SolveReport>,
    },

    #[error("no convergence after {} iterations (residual {:.3e})", .report.iterations, .report.residual_weighted)]
    NoConvergence { report: Box<SolveReport> },

    #[error("line search failed: no decrease of the merit function after 20 halvings")]
    Stagnation { report: Box<SolveReport> },

    #[error("invalid report: {0}")]
    InvalidReport(String),

    #[error("epsilon {eps:e} is below the validation floor {floor:e}")]
    EpsilonBelowFloor { eps: f64, floor: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
