use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inputs that violate an operation's preconditions.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A trained model cannot be used, e.g. a hyperplane with zero weights.
    #[error("model error: {0}")]
    Model(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed input data, with the 1-based line or row it came from when known.
    #[error("data error{}: {message}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Data { row: Option<usize>, message: String },

    /// Malformed model or manifest document.
    #[error("format error: {0}")]
    Format(String),

    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn data(row: Option<usize>, message: impl Into<String>) -> Self {
        Error::Data {
            row,
            message: message.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
