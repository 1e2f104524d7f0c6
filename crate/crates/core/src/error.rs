use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value is missing, malformed, or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric field violated its validated range.
    #[error("{field} = {value} is out of range ({bound})")]
    Range {
        field: &'static str,
        value: String,
        bound: String,
    },

    /// The configuration file could not be parsed.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Random placement could not satisfy its constraints.
    #[error("drop error: {0}")]
    Drop(String),

    /// Statistics requested on unusable input.
    #[error("statistics error: {0}")]
    Stats(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
