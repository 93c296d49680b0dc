use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("resampling error: plot {plot_id} t={timestamp}: no GPR samples in 10 cm cell {cell}")]
    EmptyCell {
        plot_id: u32,
        timestamp: i64,
        cell: usize,
    },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("undefined {0} (zero variance)")]
    UndefinedMetric(String),
    #[error("interpolation error: {0}")]
    Interp(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
