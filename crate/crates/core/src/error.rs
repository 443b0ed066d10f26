use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("token {token} out of range for modulus {p}")]
    TokenOutOfRange { token: usize, p: usize },

    #[error("sequence has length {got}, expected {expected}")]
    WrongLength { got: usize, expected: usize },

    #[error("domain has {required} bags, above the cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },

    #[error("construction needs {required} weight entries, above the cap of {cap}")]
    WidthCapExceeded { required: u128, cap: u128 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NoConvergence { iterations: usize, last_estimate: f64 },

    #[error("rational overflow while computing {0}")]
    RationalOverflow(&'static str),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("{0} expects a 2-D parameter; route 1-D parameters through AdamW")]
    NotMatrix(&'static str),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("format error: {0}")]
    Format(String),
}
