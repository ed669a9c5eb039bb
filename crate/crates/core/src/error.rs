use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the region where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulated level left the representable range.
    #[error("path overflow at t = {t}: |y_t| is no longer finite")]
    PathOverflow { t: usize },

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("degenerate path: sum of squared regressors is {0:e}")]
    DegeneratePath(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("replication {rep} failed at seed (base {base}, stream {stream}): {source}")]
    Replication {
        rep: usize,
        base: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Domain(_) | Error::DegeneratePath(_) | Error::InvalidInput(_) => 3,
            Error::PathOverflow { .. } | Error::Overflow(_) => 4,
            Error::Replication { source, .. } => source.exit_code(),
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}
