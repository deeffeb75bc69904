use std::fmt;

use thiserror::Error;

/// The first invariant a candidate [`ApFunction`](crate::ApFunction) violates.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoTerms,
    NonPositiveAlpha(f64),
    NonFinite { index: usize },
    NegativeExponent { index: usize, lambda: f64 },
    NotIncreasing { index: usize },
    ZeroAmplitude { index: usize, lambda: f64 },
    GapTooSmall { index: usize, gap: f64, alpha: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTerms => write!(f, "function has no terms"),
            Violation::NonPositiveAlpha(a) => write!(f, "alpha must be positive and finite, got {a}"),
            Violation::NonFinite { index } => write!(f, "term {index} has a non-finite field"),
            Violation::NegativeExponent { index, lambda } => {
                write!(f, "term {index} has negative exponent {lambda}")
            }
            Violation::NotIncreasing { index } => {
                write!(f, "exponents must be strictly increasing (term {index})")
            }
            Violation::ZeroAmplitude { index, lambda } => write!(
                f,
                "term {index} (lambda = {lambda}) has |a_plus| + |a_minus| = 0"
            ),
            Violation::GapTooSmall { index, gap, alpha } => write!(
                f,
                "gap {gap} before term {index} is smaller than alpha = {alpha}"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid almost periodic function: {0}")]
    InvalidFunction(Violation),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("row {n} is not row-stochastic (sum = {sum})")]
    NotStochastic { n: usize, sum: f64 },

    #[error("unknown row family `{0}`")]
    UnknownFamily(String),

    #[error("class hierarchy violated on row {n}: {stronger} holds but {weaker} does not")]
    HierarchyViolation {
        n: usize,
        stronger: String,
        weaker: String,
    },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
