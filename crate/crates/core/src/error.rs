use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not reach tolerance {tolerance:e} within {max_nodes} nodes")]
    Accuracy { tolerance: f64, max_nodes: usize },

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no blow-up theorem applies to these parameters")]
    NoTheorem,

    #[error("no blow-up observed before t_max = {t_max} (eps = {eps})")]
    NoBlowUp { eps: f64, t_max: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("evaluation window is empty: onset {onset} >= end {end}")]
    EmptyWindow { onset: f64, end: f64 },

    #[error("fit kind {fit} does not match bound kind {bound}")]
    KindMismatch { fit: String, bound: String },

    #[error("time step failed: {0}")]
    StepFailed(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
