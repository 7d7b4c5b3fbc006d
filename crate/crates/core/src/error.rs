use thiserror::Error;

use crate::corrector::CorrectorOutcome;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("rank-2 inverse update is singular (capacitance determinant {det:e})")]
    SingularUpdate { det: f64 },

    #[error("iterate is infeasible: {0}")]
    Infeasible(String),

    #[error(
        "degenerate instance: |sigma({i},{j})| = {value} reaches rho_max = {rho_max}; \
         no strictly feasible diagonal start exists"
    )]
    DegenerateInstance {
        i: usize,
        j: usize,
        value: f64,
        rho_max: f64,
    },

    #[error("cubic coordinate solve produced no finite real root")]
    NumericalBreakdown,

    #[error("diagonal quadratic has no feasible root (s={s}, c={c}, rho={rho}, t={t})")]
    NoFeasibleRoot { s: f64, c: f64, rho: f64, t: f64 },

    #[error("corrector did not converge in {} sweeps (residual {:e})", .best.stats.sweeps, .best.stats.residual)]
    MaxSweepsExceeded { best: Box<CorrectorOutcome> },

    #[error("predictor step collapsed: no feasible point after {halvings} halvings")]
    StepCollapse { halvings: usize },

    #[error("line search failed at Newton iteration {iteration}")]
    LineSearchFailure { iteration: usize },

    #[error("reference solver hit its iteration cap ({iterations}) with residual {residual:e}")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
