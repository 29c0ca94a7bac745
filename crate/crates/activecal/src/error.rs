use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("spline: {0}")]
    Spline(String),
    #[error("sensor model: {0}")]
    Sensor(String),
    #[error("acoustic frontend: {0}")]
    Acoustic(String),
    #[error("scan matching: {0}")]
    Scan(String),
    #[error("observability: {0}")]
    Observability(String),
    #[error("estimator: {0}")]
    Estimator(String),
    #[error("planner: {0}")]
    Planner(String),
    #[error("harness: {0}")]
    Harness(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
