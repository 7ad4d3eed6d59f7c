use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("invalid group order {0}: must be at least 1")]
    InvalidOrder(usize),

    #[error("symmetric group S_{0} exceeds the order cap (d <= 7)")]
    OrderCap(usize),

    #[error("unknown group spec `{0}`")]
    GroupSpec(String),

    #[error("non-finite input to activation `{0}`")]
    Domain(String),

    #[error("activation `{0}` has no gamma constant; run estimate_gamma0 first")]
    MissingConstant(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("unknown activation spec `{0}`")]
    ActivationSpec(String),

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("degenerate estimate: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("training diverged at iteration {iteration}")]
    Divergence { iteration: usize, trace: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
