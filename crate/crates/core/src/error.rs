use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("derivative is not monotone: cannot bracket slope {slope}")]
    NonMonotoneDerivative { slope: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}] (estimated error {error:e})")]
    QuadratureFailure { a: f64, b: f64, error: f64 },

    #[error("slope {slope} outside [{t0}, {t1}]")]
    SlopeOutOfRange { slope: f64, t0: f64, t1: f64 },

    #[error("invalid preset parameter: {0}")]
    InvalidPresetParameter(String),

    #[error("tabulated curve needs at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("tabulated samples are not monotone: {0}")]
    NotMonotone(String),

    #[error("tabulated samples are not strictly convex: {0}")]
    NotConvex(String),

    #[error("curvature {curvature:e} at u = {u} is below the floor {floor:e}")]
    CurvatureFloorViolated { u: f64, curvature: f64, floor: f64 },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("Möbius table limit {limit} exceeds the budget of {budget}")]
    LimitTooLarge { limit: usize, budget: usize },

    #[error("tail bound violated: {0}")]
    TailBoundViolated(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("covariance matrix is singular (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("no line hit the target after {attempts} attempts (closest miss {closest_miss:?} at Mahalanobis distance {closest_distance:.3})")]
    Exhausted {
        attempts: u64,
        closest_miss: [i64; 2],
        closest_distance: f64,
        /// Counts of misses by Mahalanobis distance, in unit-width bins.
        miss_histogram: Vec<u64>,
    },

    #[error("path is empty")]
    EmptyPath,

    #[error("state space of {size} configurations exceeds the limit of {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("insufficient replicates: {0}")]
    InsufficientReplicates(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o failure on {path}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure { path: path.into(), source }
    }
}
