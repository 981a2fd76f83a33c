use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("infeasible: Pc ≤ ν/2 (Pc = {pc}, ν/2 = {half_nu})")]
    InfeasibleConstraint { pc: f64, half_nu: f64 },

    #[error("collision constraint Pc = {pc} has no miss-detection solution in (0, 1)")]
    NoRoot { pc: f64 },

    #[error("transition matrix column {column} sums to {sum}, not 1")]
    ColumnSumViolation { column: usize, sum: f64 },

    #[error("steady-state system is singular (reducible chain)")]
    SingularSystem,

    #[error("degenerate closed-form denominator {value:e}")]
    DegenerateDenominator { value: f64 },

    #[error("more than two stationary points of the throughput found at {roots:?}")]
    AmbiguousLandscape { roots: Vec<f64> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
