use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("variable x{index} is out of range for dimension {dimension}")]
    VariableOutOfRange { index: usize, dimension: usize },

    #[error("zero denominator at byte {position}")]
    ZeroDenominator { position: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("the zero polynomial is not allowed here")]
    ZeroPolynomial,

    #[error("polynomial has a nonzero constant term")]
    NonzeroConstant,

    #[error("polynomial is not homogeneous")]
    NotHomogeneous,

    #[error("homogeneous degree {0} is odd; the sub-level set cannot be bounded")]
    OddDegree(u32),

    #[error("moments through order {required} are needed, only {available} available")]
    InsufficientMoments { required: usize, available: usize },

    #[error("matrix is not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrices are expressed in different bases")]
    BasisMismatch,

    #[error("symmetric eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("no samples fell inside the restriction region")]
    DegenerateEstimate,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
