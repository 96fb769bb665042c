use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{location}: {source}")]
    Expression {
        location: String,
        #[source]
        source: ParseError,
    },

    #[error("metric is not symmetric positive definite at {point:?}")]
    NonSpdMetric { point: [f64; 3] },

    #[error("metric pullback lost positive definiteness at t = {t}")]
    NonSpdPullback { t: f64 },

    #[error("trajectory left the chart at t = {t} (point {point:?})")]
    TrajectoryLeftChart { t: f64, point: [f64; 3] },

    #[error("integrator failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("direction is degenerate: <omega, xi> = {c:e}")]
    DegenerateDirection { c: f64 },

    #[error("phase gradient vanished at t = {t}")]
    GradientVanished { t: f64 },

    #[error("eigenvalue solve failed: {0}")]
    EigSolveFailure(String),

    #[error("branch lost near y = {y} after {attempts} step refinements")]
    BranchLost { y: f64, attempts: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
