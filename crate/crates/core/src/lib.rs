//! Partition-function estimation for binary RBMs by annealed importance
//! sampling, with annealing schedules optimized to minimize the variance of
//! the log importance weights.
//!
//! The pipeline: a cheap AIS pass with a linear schedule surveys the
//! variance profile g(beta) along the geometric path, the profile is
//! smoothed and differentiated, the optimal-schedule boundary value problem
//! is solved by fixed-point iteration, the schedule is optionally
//! decelerated to protect chain mixing, and a main AIS pass runs on the
//! optimized schedule. Enumeration oracles provide exact ground truth for
//! small models.

pub mod ais;
pub mod error;
pub mod math;
pub mod model;
pub mod oracle;
pub mod schedule;
pub mod trainer;

pub use ais::{ess, log_weight_std, on_the_fly_expectation, run_ais, AisResult, OnTheFlyStats};
pub use error::{Error, Result};
pub use model::{GeometricPath, RbmParams, VisibleState};
pub use oracle::{exact_g, exact_log_z, EnumerationMethod, ExactSummary, PathTable};
pub use schedule::{
    de_solve, decelerate, dlog_g, estimate_g_table, functional_j, quadrature_schedule, smooth,
    var_log_w_perfect, GSource, GTable, Schedule,
};
pub use trainer::{train, BinaryDataset, TrainAlgorithm, TrainConfig};
