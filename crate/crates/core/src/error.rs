use alloc::string::String;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("innovation law is not admissible: {0}")]
    NonIntegrable(String),
    #[error("adaptive quadrature did not reach tolerance {tol:e} (estimated error {achieved:e})")]
    QuadratureFailure { tol: f64, achieved: f64 },
    #[error("no sign change found while bracketing {0}")]
    BracketFailure(String),
    #[error("parameter vector has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("volatility recursion is outside the stationary region (sum of beta = {0})")]
    NonstationaryRegion(f64),
    #[error("moving-average coefficient {0} is not invertible")]
    InvertibilityViolation(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("objective is not finite at the evaluation point")]
    NonFiniteObjective,
    #[error("need at least {required} observations, got {got}")]
    InsufficientData { required: usize, got: usize },
    #[error("information matrix is numerically singular (rcond = {0:e})")]
    SingularInformation(f64),
    #[error("constraint matrix is rank deficient (rank {rank} < {rows} rows)")]
    RankDeficientR { rank: usize, rows: usize },
    #[error("no point of the parameter space satisfies the linear constraint")]
    InfeasibleConstraint,
    #[error("covariance form requires a model with zero conditional mean")]
    NotScaleOnly,
    #[error("tail is degenerate: the ({0})-th largest magnitude is zero")]
    DegenerateTail(usize),
    #[error("{failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonIntegrable(_) => "non_integrable",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::BracketFailure(_) => "bracket_failure",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonstationaryRegion(_) => "nonstationary_region",
            Error::InvertibilityViolation(_) => "invertibility_violation",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::DegenerateInput(_) => "degenerate_input",
            Error::NonFiniteObjective => "non_finite_objective",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::SingularInformation(_) => "singular_information",
            Error::RankDeficientR { .. } => "rank_deficient_r",
            Error::InfeasibleConstraint => "infeasible_constraint",
            Error::NotScaleOnly => "not_scale_only",
            Error::DegenerateTail(_) => "degenerate_tail",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::InvalidScenario(_) => "invalid_scenario",
        }
    }
}
