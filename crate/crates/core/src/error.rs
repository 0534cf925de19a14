use thiserror::Error;

#[derive(Debug, Error)]
pub enum DlError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("infeasible projection target: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resource limit exceeded: frontier of {frontier} states at radius {radius} (budget {budget} states)")]
    Resource {
        frontier: usize,
        radius: u32,
        budget: usize,
    },

    #[error("ball cache format version {found} is not supported (expected {expected})")]
    CacheVersion { found: u64, expected: u64 },

    #[error("ball cache parameters {found} do not match current parameters {expected}")]
    CacheParams { found: String, expected: String },

    #[error("corrupt ball cache at line {line}: {msg}")]
    CorruptLine { line: usize, msg: String },

    /// A mathematical guarantee failed to hold; always a bug.
    #[error("internal invariant failed: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DlError>;
