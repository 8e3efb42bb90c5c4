use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid material `{name}`: {reason}")]
    InvalidMaterial { name: String, reason: String },

    #[error("invalid phantom: {0}")]
    InvalidPhantom(String),

    #[error("insufficient sampling: {0}")]
    InsufficientSampling(String),

    #[error("oversampling {actual} too low for mask harmonics up to m = {harmonic}; need at least {required}")]
    Oversampling {
        actual: usize,
        required: usize,
        harmonic: usize,
    },

    #[error("grid spacing {actual_m:.3e} m violates the propagation sampling criterion; need spacing >= {required_m:.3e} m")]
    PropagationSampling { actual_m: f64, required_m: f64 },

    #[error("mask harmonics are not resolved: spacing {actual_m:.3e} m, need < {required_m:.3e} m")]
    MaskSampling { actual_m: f64, required_m: f64 },

    #[error("coverage mismatch: {0}")]
    Coverage(String),

    #[error("dimension mismatch: {0}")]
    Dimensions(String),

    #[error("flat field pixel ({row}, {col}) is {value}; must be > 0")]
    NonPositiveFlat { row: usize, col: usize, value: f64 },

    #[error("mask contrast alpha is zero; differential phase is undefined")]
    ZeroContrast,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config: {0}")]
    Config(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Coarse grouping used by front ends to choose exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) => ErrorCategory::Config,
            Error::Io(_) | Error::Csv(_) | Error::Format(_) => ErrorCategory::Io,
            _ => ErrorCategory::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Io,
}
