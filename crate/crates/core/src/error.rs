use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular local system{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    SingularLocalSystem { context: Option<String> },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("unknown attribute {0}")]
    UnknownAttribute(u32),
    #[error("topology repair failed after {0} passes")]
    RepairFailed(usize),
    #[error("entity {0} has zero measure")]
    ZeroMeasureEntity(String),
    #[error("exactness violation: {0}")]
    ExactnessViolation(String),
    #[error("zero diagonal at row {0}")]
    ZeroDiagonal(usize),
    #[error("indefinite preconditioner: r^T B r = {0}")]
    IndefinitePreconditioner(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
