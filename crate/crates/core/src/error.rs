use thiserror::Error;

/// A single violated invariant of a state.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("density nonpositive")]
    DensityNonpositive,
    #[error("temperature nonpositive")]
    TemperatureNonpositive,
    #[error("temperature tensor not positive definite")]
    TemperatureNotPositiveDefinite,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("truncation order {0} below minimum {1}")]
    OrderTooLow(usize, usize),
    #[error("coefficient list has length {found}, expected {expected}")]
    CoefficientLength { expected: usize, found: usize },
    #[error("constraint violated: {0}")]
    Constraint(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {}", join(.0))]
    InvalidState(Vec<Violation>),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is numerically singular (condition estimate {0:e})")]
    Singular(f64),
    #[error("eigensolver did not converge")]
    EigenNoConvergence,
    #[error("hermite root iteration failed for degree {degree}: scaled residual {residual:e}")]
    RootFinding { degree: usize, residual: f64 },
    #[error("CFL violation: dt = {dt:e} exceeds bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },
    #[error("state invalid in cell {cell} after step {step}: {}", join(.violations))]
    StepProducedInvalidState {
        cell: usize,
        step: usize,
        violations: Vec<Violation>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::EigenNoConvergence
                | Error::RootFinding { .. }
                | Error::Cfl { .. }
                | Error::StepProducedInvalidState { .. }
        )
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
