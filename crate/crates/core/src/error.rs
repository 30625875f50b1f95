use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A linked tree that is not a full binary tree.
    #[error("malformed tree at {path}: {reason}")]
    Structure { path: String, reason: String },

    /// An encoded tree that fails validation; holds the rendered diagnostics.
    #[error("invalid encoded tree: {0}")]
    InvalidTree(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// CSV or assignment parse failure. `row` is the 1-based data row
    /// (the header is not counted), `column` is 1-based when known.
    #[error("parse error at row {row}{}: {reason}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        column: Option<usize>,
        reason: String,
    },

    /// JSON that does not match the versioned schema. `path` is the
    /// JSON path of the offending value, e.g. `nodes[3].thr`.
    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
