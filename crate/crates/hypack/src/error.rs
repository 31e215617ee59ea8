use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate edge {0:?}")]
    DuplicateEdge(Vec<usize>),
    #[error("empty edge set")]
    EmptyEdgeSet,
    #[error("no walk from {s} to {t}")]
    NotConnected { s: usize, t: usize },
    #[error("nonpositive weight on edge {edge} ({value})")]
    BalanceViolation { edge: usize, value: String },
    #[error("walk stuck after {0:?}")]
    StuckWalk(Vec<usize>),
    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("retry budget exhausted in {stage}: {reason}")]
    RetriesExhausted { stage: String, reason: String },
    #[error("absorption infeasible, unmatched vertices {0:?}")]
    AbsorptionInfeasible(Vec<usize>),
    #[error("connection failed at pair {0}")]
    ConnectionFailed(usize),
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: String, reason: String },
    #[error("usage budget exceeded at {set:?} ({used} > {cap})")]
    BudgetExceeded { set: Vec<usize>, used: usize, cap: usize },
    #[error("parameter error: {0}")]
    Param(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn stage(stage: &str, reason: impl Into<String>) -> Error {
    Error::Stage { stage: stage.to_string(), reason: reason.into() }
}
