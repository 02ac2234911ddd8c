use alloc::string::String;

/// Errors raised anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("length error: {0}")]
    Length(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("unknown identifier: {0}")]
    Lookup(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("split construction failed: {0}")]
    Construction(String),
    #[error("not enough samples: {0}")]
    Size(String),
    #[error("empty result: {0}")]
    Empty(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
}

pub type Result<T> = core::result::Result<T, Error>;
