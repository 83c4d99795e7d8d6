use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {field} {reason}")]
    InvalidSpace { field: &'static str, reason: String },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("states belong to different spaces")]
    SpaceMismatch,

    #[error("projection level must be >= 1")]
    ZeroProjection,

    #[error("monotonicity condition violated: {0}")]
    NotMonotone(String),

    #[error("resolvent did not converge (last residual {residual:e})")]
    Resolvent { residual: f64 },

    #[error("inverse of a map requires strict monotonicity (alpha > 0)")]
    NoInverse,

    #[error("ensembles have unequal sizes ({left} vs {right})")]
    UnequalEnsembles { left: usize, right: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("time grids do not match")]
    GridMismatch,

    #[error("time grid must start at 0 and be strictly increasing")]
    BadTimeGrid,

    #[error("invalid drift: {0}")]
    InvalidDrift(String),

    #[error("inadmissible noise: {0}")]
    InadmissibleNoise(String),

    #[error("explicit scheme unstable: dt*[beta]_1*lambda_N = {value:.4} exceeds 0.5")]
    Cfl { value: f64 },

    #[error("invalid solver configuration: {0}")]
    Solver(String),

    #[error("inner solve failed at step {step} (residual {residual:e})")]
    InnerSolve { step: usize, residual: f64 },

    #[error("Picard iteration did not reach tolerance; distances {distances:?}")]
    PicardExhausted { distances: Vec<f64> },

    #[error("control interpretation defined for g=0 and law-free drift: {0}")]
    Control(String),

    #[error("grid too coarse: spacing {spacing:e} exceeds required {required:e}")]
    CoarseGrid { spacing: f64, required: f64 },

    #[error("wave vanishes on the evaluation window; log branch undefined")]
    LogBranch,

    #[error("feynman check: {0}")]
    Feynman(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
