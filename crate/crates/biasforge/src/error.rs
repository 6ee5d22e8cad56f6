use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A cell could not be parsed while loading a CSV file.
    #[error("csv error in {path}: {reason}, row {row}, column {column}")]
    CsvParse {
        path: String,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A bias target that cannot be met by any assignment or flip count.
    #[error("infeasible bias target: {0}")]
    Infeasible(String),

    #[error("missing column '{0}'")]
    MissingColumn(String),

    #[error("group {0} has no rows")]
    EmptyGroup(crate::data::Group),

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("model error: {0}")]
    Model(String),
}

pub type Result<T> = std::result::Result<T, Error>;
