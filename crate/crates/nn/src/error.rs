use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("index {index} out of range for size {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("training diverged at step {step}: loss {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Core(#[from] eoattn_core::Error),
}

impl Error {
    /// True for numerical failures rather than bad inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Divergence { .. } => true,
            Error::Core(e) => e.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::ShapeMismatch(msg.into())
}
