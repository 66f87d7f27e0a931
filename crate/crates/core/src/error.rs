use std::path::PathBuf;

/// Errors raised by the solver, the simulator and the I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error(
        "no convergence in {stage} after {iterations} iterations \
         (last update {last_update:.3e}, contraction estimate {contraction:.4})"
    )]
    NoConvergence {
        stage: String,
        iterations: usize,
        last_update: f64,
        contraction: f64,
    },

    #[error("obstacle violated at node {node}: v - obstacle = {margin:.3e}")]
    ObstacleViolation { node: usize, margin: f64 },

    #[error("free boundary {x_star} exceeds 0.8 * L = {limit}; enlarge grid.L")]
    DomainTooSmall { x_star: f64, limit: f64 },

    #[error("rate {rate} outside the computed ladder [{lo}, {hi}]")]
    RateOutOfRange { rate: f64, lo: f64, hi: f64 },

    #[error("rung {index}: {source}")]
    Rung {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("surface cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Short variant name, printed by the command line front end.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Validation { .. } => "ValidationError",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ObstacleViolation { .. } => "ObstacleViolation",
            Error::DomainTooSmall { .. } => "DomainTooSmall",
            Error::RateOutOfRange { .. } => "RateOutOfRange",
            Error::Rung { source, .. } => source.name(),
            Error::Parse(_) => "ParseError",
            Error::Cache { .. } => "CacheError",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
