pub mod basis;
pub mod data;
pub mod error;
pub(crate) mod linalg;
pub mod probit;

pub use data::{ColumnKind, ColumnSchema, Dataset, FilterRule, RejectionReport};
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
