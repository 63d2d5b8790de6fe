use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time grid: {0}")]
    Grid(String),
    #[error("network: {0}")]
    Network(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schedule cost: {0}")]
    Schedule(String),
    #[error("lp: {0}")]
    Lp(String),
    #[error("{stage}: LP ended with status {status}")]
    Solve { stage: &'static str, status: String },
    #[error("constructive flow: {0}")]
    Constructive(String),
    #[error("curve reconstruction: {0}")]
    Curves(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
