use std::path::PathBuf;

use crate::ground::GroundDistribution;
use crate::lifted::LiftedDistribution;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// The distribution held just before an observation turned out to be impossible.
#[derive(Debug, Clone)]
pub enum PriorSnapshot {
    Lifted(LiftedDistribution),
    Ground(GroundDistribution),
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot expand to ground states: {0}")]
    UnsupportedExpansion(String),

    #[error("unsupported constraint: {0}")]
    UnsupportedConstraint(String),

    #[error("unsupported effect: {0}")]
    UnsupportedEffect(String),

    #[error("model validation failed: {0}")]
    ModelValidation(String),

    #[error("resource limit exceeded in {what}: budget {budget}, frontier {frontier}")]
    ResourceLimit {
        what: &'static str,
        budget: usize,
        frontier: usize,
    },

    #[error("observation has zero likelihood{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    ImpossibleObservation {
        step: Option<usize>,
        prior: Box<PriorSnapshot>,
    },

    #[error("lifted and ground posteriors disagree at step {step}: deviation {deviation:e}")]
    OracleMismatch { step: usize, deviation: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ModelValidation(_) => 2,
            Error::ResourceLimit { .. } => 3,
            Error::ImpossibleObservation { .. } => 4,
            _ => 1,
        }
    }

    pub(crate) fn with_step(self, step: usize) -> Self {
        match self {
            Error::ImpossibleObservation { prior, .. } => Error::ImpossibleObservation {
                step: Some(step),
                prior,
            },
            other => other,
        }
    }
}
