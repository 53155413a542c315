//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DfcError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DfcError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("set is empty")]
    EmptySet,
    #[error("base point is not in the set")]
    BasePointNotInSet,
    #[error("point is not in the set")]
    PointNotInSet,
    #[error("set is not polyhedral")]
    NotPolyhedral,
    #[error("direction is unbounded for this set")]
    UnboundedDirection,
    #[error("unsupported set variant: {0}")]
    UnsupportedVariant(String),
    #[error("invalid set expression: {0}")]
    InvalidSet(String),
    #[error("condition violated: {reason}; witness {witness:?}")]
    ConditionViolated { reason: String, witness: Vec<f64> },
    #[error("family invalid: {0}")]
    FamilyInvalid(String),
    #[error("invalid big-M matrix: {0}")]
    MMatrixInvalid(String),
    #[error("big-M coefficient is unbounded for pair ({0}, {1})")]
    UnboundedM(usize, usize),
    #[error("homothety data does not reproduce the family; witness {witness:?}")]
    HomothetyMismatch { witness: Vec<f64> },
    #[error("oracle unbounded: {0}")]
    OracleUnbounded(String),
    #[error("piece {0} is empty")]
    EmptyPiece(usize),
    #[error("iteration limit reached; best bound {best_bound}")]
    IterationLimit { best_bound: f64 },
    #[error("relaxation is infeasible")]
    Infeasible,
    #[error("scale limit exceeded: {0}")]
    ScaleLimit(String),
    #[error("nonlinear atom present: {0}")]
    NonlinearAtomPresent(String),
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
