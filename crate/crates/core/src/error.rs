use thiserror::Error;

/// Errors produced by the touch-emulation engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs whose shapes or topologies do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// Inputs that violate a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("bone {bone} has zero length in the template skeleton")]
    DegenerateBone { bone: usize },

    #[error("insufficient overlap: {found} pixels in mask, need at least {required}")]
    InsufficientOverlap { found: usize, required: usize },

    #[error("degenerate color statistics on channel {channel}: sigma {sigma:e}")]
    DegenerateStatistics { channel: usize, sigma: f64 },

    /// Point sets that do not pin down a rigid transform.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("underdetermined: {0}")]
    Underdetermined(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// A scenario or config field failed validation; `path` is the dotted field path.
    #[error("{path}: {message}")]
    Field { path: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("codec error: {0}")]
    Codec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Field {
            path: path.into(),
            message: message.into(),
        }
    }
}
