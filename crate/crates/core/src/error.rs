//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the purc-core building blocks.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error in {path} (record {record}): {message}")]
    Parse {
        path: String,
        record: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("unknown link id `{0}`")]
    UnknownLink(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A utility rate came out nonnegative, i.e. the parameter vector left
    /// the model's domain (all link utilities must be strictly negative).
    #[error("nonnegative utility rate {value} on link `{link}`")]
    NonNegativeUtility { link: String, value: f64 },

    #[error("perturbation evaluated at negative flow {0}")]
    NegativeFlow(f64),

    #[error("destination `{destination}` is not reachable from origin `{origin}`")]
    Unreachable {
        origin: String,
        destination: String,
    },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("flow decomposition left residual {residual:.3e} (cyclic flow?)")]
    DecompositionResidual { residual: f64 },

    #[error("random walk reached a dead end at node `{node}`")]
    DeadEnd { node: String },

    #[error("random walk exceeded the step cap of {cap}")]
    StepCapExceeded { cap: usize },

    #[error("trip is invalid: {0}")]
    InvalidTrip(String),

    #[error("no active links selected for OD {origin}->{destination}")]
    EmptySelection {
        origin: String,
        destination: String,
    },

    #[error("regressor matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("not enough observations: {n_obs} rows for {params} parameters")]
    InsufficientObservations { n_obs: usize, params: usize },

    #[error("route enumeration exceeded the cap of {max_routes} routes")]
    RouteExplosion { max_routes: usize },

    #[error("calibration search failed: {0}")]
    SearchFailed(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
