use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by what the caller can do about them: `Config` means
/// the request itself was malformed (bad term list, invalid hyperparameter),
/// `Schema`/`Parse`/`Domain` mean the data violated a precondition, and
/// `Numerical` means a computation failed in a way that retrying with the
/// same inputs will not fix. The CLI maps these groups onto distinct exit
/// codes, so keep new variants in the right bucket.
#[derive(Error, Debug)]
pub enum Error {
    /// The model/pipeline configuration is invalid (unknown column, bad
    /// hyperparameter, contradictory options).
    #[error("configuration error: {0}")]
    Config(String),

    /// The declared schema does not match the file (missing column,
    /// duplicate weight column, wrong kind).
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell could not be parsed under its declared kind in a way that is
    /// an error rather than mere missingness (e.g. an undeclared
    /// categorical level).
    #[error("parse error at data row {row}: {message}")]
    Parse { row: usize, message: String },

    /// Data violated a mathematical precondition (degenerate outcome,
    /// identical covariate values, empty donor pool...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed: singular system, non-convergence,
    /// non-finite intermediate.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// Shorthand constructors; most call sites build messages with
    /// `format!` and these keep them to one line.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
