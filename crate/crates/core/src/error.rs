use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain too small: {0}")]
    Domain(String),

    #[error("numerical instability at t = {t}")]
    Instability { t: f64 },

    #[error("arrival time is ambiguous: boundary mass fraction {fraction:e} exceeds {threshold:e}")]
    AmbiguousPosition { fraction: f64, threshold: f64 },

    #[error("singular cost: amplitude path touches zero at t = {t}")]
    SingularCost { t: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("missing operator norm: {0}")]
    MissingNorm(&'static str),

    #[error("scenario mismatch: {0}")]
    ScenarioMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
