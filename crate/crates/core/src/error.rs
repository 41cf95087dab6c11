use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("initial bearing is undefined for coincident points")]
    CoincidentPoints,

    #[error("ship type {0} is outside the vocabulary of {1} types")]
    UnknownShipType(u32, usize),

    #[error("categorical field `{field}` value {value} is out of range")]
    CategoricalOutOfRange { field: &'static str, value: u32 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),

    #[error("R² is undefined when the targets have zero variance")]
    ZeroVariance,

    #[error("scenario validation failed: {0}")]
    Scenario(String),

    #[error("no current table for month {0}")]
    MissingCurrentMonth(u32),

    #[error("point ({lat}, {lon}) lies outside the current grid")]
    OutsideGrid { lat: f64, lon: f64 },

    #[error("episode already finished; call reset before stepping")]
    EpisodeFinished,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("loss must be a scalar, got {0} elements")]
    NonScalarLoss(usize),

    #[error("non-finite loss during update: {0}")]
    NonFiniteLoss(String),

    #[error("checkpoint does not match: {0}")]
    CheckpointMismatch(String),

    #[error("empty trace")]
    EmptyTrace,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

/// Reads a whole file, mapping failures to [`Error::Io`].
pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
