use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad parameter: {0}")]
    BadParameter(String),

    #[error("eigenvalue list is not non-decreasing at index {index} ({prev} > {next})")]
    NotMonotone { index: usize, prev: f64, next: f64 },

    #[error("sum of 1/a_i^2 is not certifiably finite: {0}")]
    NonSummable(String),

    #[error("explicit spectrum has no tail model; infinite sums are unavailable beyond the {len} listed values")]
    NoTailModel { len: usize },

    #[error("series tail error {tail_error:e} above budget {budget:e} after {terms} terms")]
    ToleranceUnreachable {
        terms: usize,
        tail_error: f64,
        budget: f64,
    },

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("{what} = {value} outside ({lo}, {hi})")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("calibration fit rejected: {0}")]
    PoorFit(String),

    #[error("exponential tilt is degenerate: {0}")]
    DegenerateTilt(String),

    #[error("cf inversion estimate {estimate:e} is below the trusted floor {floor:e}; use the tilted Monte Carlo oracle")]
    UnderflowRegime { estimate: f64, floor: f64 },

    #[error("truncation bracket is vacuous (best lower bound {lower})")]
    VacuousBracket { lower: f64 },

    #[error("auxiliary function is not regularly varying near zero: {0}")]
    NotRegularlyVarying(String),

    #[error("step sequence leaves (0, inf) at step {step} (x = {value})")]
    LeavesDomain { step: usize, value: f64 },

    #[error("phi({x}) = {value} is not positive")]
    NonPositivePhi { x: f64, value: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
}
