use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("MPS syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("equality row `{0}` is not supported; the perturbation scheme needs inequalities")]
    UnsupportedEquality(String),
    #[error("unsupported MPS feature: {0}")]
    Unsupported(String),
    #[error("problem has no columns")]
    EmptyProblem,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("row {0} is the zero vector")]
    ZeroRow(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("perturbed bounds cross at column {0}")]
    CrossedBounds(usize),
    #[error("basis matrix is singular at elimination step {0}")]
    SingularBasis(usize),
    #[error("perturbation rejected {0} times in a row")]
    RejectionBudgetExceeded(usize),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("no blocking constraint along the edge leaving row {0}")]
    UnboundedDirection(usize),
    #[error("starting vertex violates row {row} by {violation:e}")]
    InfeasibleStart { row: usize, violation: f64 },
    #[error("auxiliary objective is not strictly inside the starting normal cone (min multiplier {0:e})")]
    NonGenericAuxiliary(f64),
    #[error("pivot budget of {0} exhausted")]
    PivotBudget(usize),
    /// Carries the 1-based number of the constraint that could not be added.
    #[error("constraint {0} cannot be satisfied together with the earlier ones")]
    Infeasible(usize),
    #[error("auxiliary direction has a zero component at {0}")]
    ZeroComponent(usize),
    #[error("stationarity residual {0:e} exceeds the certificate limit")]
    StationarityViolation(f64),
    #[error("enumeration of {0} subsets exceeds the budget")]
    EnumerationTooLarge(u128),
    #[error("feasible region has no vertex")]
    EmptyRegion,
    #[error("two bases claim the same objective at t = {0:e}")]
    AmbiguousCone(f64),
    #[error("every mean-width trial failed")]
    AllTrialsFailed,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
