use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("non-finite telemetry value")]
    NonFiniteTelemetry,

    #[error("gradient probe requires at least one nonempty parameter group")]
    EmptyGradient,

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("actuation on non-finite update")]
    NonFiniteActuation,

    #[error("out-of-order step record: step {got} after step {last}")]
    OutOfOrderStep { last: u64, got: u64 },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("task not stressable: no degradation within {doublings} doublings from lr {floor}")]
    NotStressable { floor: f64, doublings: u32 },

    #[error("no trainable learning rate found at or above the floor {floor}")]
    NoTrainableRate { floor: f64 },

    #[error("pairing violation in `{scenario}`: {reason}")]
    Pairing { scenario: String, reason: String },

    #[error("no results found in {0}")]
    NoResults(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
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
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig { .. } => "invalid_config",
            Error::NonFiniteTelemetry => "non_finite_telemetry",
            Error::EmptyGradient => "empty_gradient",
            Error::NonFiniteGradient => "non_finite_gradient",
            Error::NonFiniteActuation => "non_finite_actuation",
            Error::OutOfOrderStep { .. } => "out_of_order_step",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NotStressable { .. } => "not_stressable",
            Error::NoTrainableRate { .. } => "no_trainable_rate",
            Error::Pairing { .. } => "pairing",
            Error::NoResults(_) => "no_results",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
