use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("query budget exhausted: requested {requested}, remaining {remaining}, spent {spent}")]
    BudgetExhausted {
        requested: usize,
        remaining: usize,
        spent: usize,
    },

    #[error("no robustness boundary bracketed after {steps} geometric steps (K at last probe = {last_k})")]
    BracketNotFound { steps: usize, last_k: f64 },

    #[error("every particle failed to reach the robustness boundary")]
    SolverFailed,

    #[error("unsupported norm {0} for this operation")]
    UnsupportedNorm(&'static str),

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: ragged row, expected {expected} fields, got {got}")]
    RaggedRow {
        line: usize,
        expected: usize,
        got: usize,
    },

    #[error("line {line}: malformed header: {message}")]
    MalformedHeader { line: usize, message: String },

    #[error("line {line}: label {label} outside [0, {classes})")]
    LabelOutOfRange {
        line: usize,
        label: usize,
        classes: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::NonFinite(_) => "non-finite",
            Error::Empty(_) => "empty-input",
            Error::BudgetExhausted { .. } => "budget-exhausted",
            Error::BracketNotFound { .. } => "bracket-not-found",
            Error::SolverFailed => "solver-failed",
            Error::UnsupportedNorm(_) => "unsupported-norm",
            Error::Undefined(_) => "undefined",
            Error::Parse { .. } => "parse",
            Error::RaggedRow { .. } => "ragged-row",
            Error::MalformedHeader { .. } => "malformed-header",
            Error::LabelOutOfRange { .. } => "label-out-of-range",
            Error::Io(_) => "io",
        }
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
