use thiserror::Error;

/// Errors raised anywhere in the simulation stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel configuration: {0}")]
    KernelConfig(String),

    #[error("kernel argument outside its domain: {0}")]
    KernelDomain(String),

    #[error("invalid generator matrix: {0}")]
    Generator(#[from] crate::delay::GeneratorDiagnostics),

    #[error("invalid delay model: {0}")]
    DelayModel(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("negative transition time {0}")]
    NegativeTime(f64),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("control history: {0}")]
    History(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate control law: |1 - D0*W0| = {0:e}")]
    DegenerateControl(f64),

    #[error("decay fit: {0}")]
    Fit(String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("malformed delay path file, line {line}: {msg}")]
    PathFile { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
