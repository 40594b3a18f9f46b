use alloc::string::String;

/// Errors raised by the optimization core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported dimension {dim} (maximum {max})")]
    UnsupportedDimension { dim: usize, max: usize },
    #[error("data error: {0}")]
    Data(String),
    #[error("matrix is not positive definite after jitter {jitter:e}")]
    Conditioning { jitter: f64 },
    #[error("inference error: {0}")]
    Inference(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("stale pair id {given} (pending {pending})")]
    Conflict { given: u64, pending: u64 },
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! contract {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err($crate::Error::Contract(alloc::format!($($arg)*)));
        }
    };
}
pub(crate) use contract;
