//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by model construction, sampling, solving and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("base model must have all-zero weights to be exactly sampleable")]
    NonZeroBaseWeights,

    #[error("all importance weights are -inf{}", match .step {
        Some(k) => format!(" at annealing step {k}"),
        None => String::new(),
    })]
    DegenerateWeights { step: Option<usize> },

    #[error(
        "fixed-point solve did not converge within {iterations} iterations \
         (last max residual {residual:.3e})"
    )]
    SolveNotConverged { residual: f64, iterations: usize },

    #[error("solved schedule is not monotone (most negative step {min_delta:.3e})")]
    NonMonotoneSchedule { min_delta: f64 },

    #[error("deceleration infeasible: {k} steps with max delta {max_delta} cannot cover [0, 1]")]
    InfeasibleDeceleration { k: usize, max_delta: f64 },

    #[error("schedule deceleration did not converge within {iterations} iterations")]
    DecelerationNotConverged { iterations: usize },

    #[error(
        "model too large for exact enumeration: {n_visible} visible x {n_hidden} hidden \
         (cap {cap} on the enumerated layer)"
    )]
    EnumerationTooLarge {
        n_visible: usize,
        n_hidden: usize,
        cap: usize,
    },

    #[error("training diverged (non-finite parameters) at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
