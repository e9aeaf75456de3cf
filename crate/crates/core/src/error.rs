use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector must have at least one entry")]
    EmptyVector,

    #[error("vector entry {index} is not finite ({value})")]
    NonfiniteEntry { index: usize, value: f64 },

    #[error("invalid relaxation bounds: tau1={tau1}, tau2={tau2} (need tau1>0, tau2>0, tau1+tau2<=2)")]
    InvalidRelaxationBounds { tau1: f64, tau2: f64 },

    #[error("relaxation parameter {lambda} at iteration {k} lies outside [{lo}, {hi}]")]
    LambdaOutOfRange { k: usize, lambda: f64, lo: f64, hi: f64 },

    #[error("sigma must be positive, got {0}")]
    NonpositiveSigma(f64),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("zeta is undefined for infinite sigma")]
    InfiniteSigma,

    #[error("invalid cutter specification: {0}")]
    InvalidSpec(String),

    #[error("gradient vanishes at a point with positive function value {value}; the zero-sublevel set is likely empty")]
    ZeroGradientAtPositiveValue { value: f64 },

    #[error("invalid weight schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid stopping rule: {0}")]
    InvalidStoppingRule(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("witness violates cutter {index} (residual {residual:e})")]
    InfeasibleWitness { index: usize, residual: f64 },

    #[error("iterate became non-finite at iteration {k}")]
    NonfiniteIterate { k: usize },

    #[error("unknown cutter kind {kind:?} at {path}")]
    UnknownCutterKind { kind: String, path: String },

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
