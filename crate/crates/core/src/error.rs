use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid augmentation: {0}")]
    InvalidAugmentation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("plan mismatch: point {index} has inclination {inclination} outside [{lo}, {hi})")]
    PlanMismatch {
        index: usize,
        inclination: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid label {value} at index {index} (expected < {num_classes})")]
    InvalidLabel {
        index: usize,
        value: u32,
        num_classes: usize,
    },

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("predictor contract violated: {0}")]
    PredictorContract(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("{}: format error at byte {offset}: {msg}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("{}: config error at line {line}: {msg}", path.display())]
    Config {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidAugmentation(_)
            | Error::InvalidArgument(_)
            | Error::Validation(_)
            | Error::PlanMismatch { .. }
            | Error::InvalidLabel { .. }
            | Error::LabelMismatch(_)
            | Error::PredictorContract(_)
            | Error::UndefinedMetric(_)
            | Error::Config { .. } => 2,
            Error::Format { .. } | Error::Data(_) | Error::Pairing(_) | Error::Io { .. } => 3,
            Error::DegenerateInput(_) => 4,
        }
    }
}
