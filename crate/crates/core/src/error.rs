use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),

    #[error("invalid action index {0} (expected 0..4)")]
    InvalidAction(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid band {lo}..{hi} Hz for sampling rate {fs} Hz")]
    InvalidBand { lo: f64, hi: f64, fs: f64 },

    #[error("degenerate scores: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("replay mismatch at trial {t}: {msg}")]
    ReplayMismatch { t: u64, msg: String },

    #[error("live session: {0}")]
    Live(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code used in CLI error JSON and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::NonFiniteReward(_) => "non_finite_reward",
            Error::InvalidAction(_) => "invalid_action",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidBand { .. } => "invalid_band",
            Error::Degenerate(_) => "degenerate",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Singular(_) => "singular",
            Error::ZeroVariance(_) => "zero_variance",
            Error::Parse { .. } => "parse",
            Error::ReplayMismatch { .. } => "replay_mismatch",
            Error::Live(_) => "live",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
