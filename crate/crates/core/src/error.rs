use thiserror::Error;

use crate::dsl::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed caller input: non-symmetric matrix, bad dimensions, non-skew generator.
    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    /// A node of the expression was evaluated outside its domain.
    #[error("domain error in `{node}`: {detail}")]
    Domain { node: String, detail: String },

    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("function is not permutation-symmetric in dimension {0}")]
    NotSymmetric(usize),

    #[error("symmetry check indeterminate: {0}")]
    Indeterminate(String),

    #[error("derivative order {order} exceeds cap {cap}")]
    OrderCap { order: usize, cap: usize },

    #[error("degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    /// Quantities with a `1/(r_i - r_j)` factor requested at (near-)equal eigenvalues.
    #[error("{0}")]
    Coalescence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Short machine-readable tag used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Parse(_) => "parse",
            Error::Domain { .. } => "domain",
            Error::UnboundParameter(_) => "unbound_parameter",
            Error::NotSymmetric(_) => "not_symmetric",
            Error::Indeterminate(_) => "indeterminate",
            Error::OrderCap { .. } => "order_cap",
            Error::DegreeCap { .. } => "degree_cap",
            Error::Coalescence(_) => "coalescence",
            Error::Numerical(_) => "numerical",
            Error::UnknownSuite(_) => "unknown_suite",
            Error::Internal(_) => "internal",
        }
    }

    /// Numerical failures and engine bugs are distinguished from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::Internal(_))
    }
}
