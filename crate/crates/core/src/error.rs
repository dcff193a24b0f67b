use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Every validation problem found, not only the first one.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A tracked front came too close to the edge of the computational box.
    #[error("truncation abort: {0}")]
    Truncation(String),

    #[error("query ({x}, {theta}) lies outside the grid")]
    OutOfBounds { x: f64, theta: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(vec![msg.into()])
    }
}
