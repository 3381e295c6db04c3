use thiserror::Error;

#[derive(Debug, Error)]
pub enum HcpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sampling contract violated: {0}")]
    Sampling(String),
    #[error("state space violated: interval {index} has length {length} < d_min = {d_min}")]
    StateSpace { index: usize, length: f64, d_min: f64 },
    #[error("schedule invalid at epoch {epoch}: {reason}")]
    Schedule { epoch: usize, reason: String },
    #[error("rate family invalid: {0}")]
    Rates(String),
    #[error("window exhausted at epoch {epoch}: {reason}")]
    WindowExhausted { epoch: usize, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HcpError>;
