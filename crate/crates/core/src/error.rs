use thiserror::Error;

/// Errors produced by panel ingestion, smoothing, tuning and the test pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at line {line}: {msg}")]
    MalformedRecord { line: usize, msg: String },
    #[error("inconsistent panel shape: {0}")]
    InconsistentShape(String),
    #[error("non-finite value at (time {i}, grid {j}, dim {d})")]
    NonFiniteValue { i: usize, j: usize, d: usize },
    #[error("degenerate smoothing window at t = {t}: bandwidth too small")]
    DegenerateWindow { t: f64 },
    #[error("empty candidate grid")]
    EmptyGrid,
    #[error("all bandwidth candidates degenerate or infeasible")]
    AllCandidatesDegenerate,
    #[error("all tau candidates infeasible")]
    AllCandidatesInfeasible,
    #[error("candidate grid too small: need at least {need}, got {got}")]
    GridTooSmall { need: usize, got: usize },
    #[error("bootstrap window L = {l} too large for ceil(n*tau) = {half}")]
    WindowTooLarge { l: usize, half: usize },
    #[error("infeasible configuration: {0}")]
    ConfigInfeasible(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
