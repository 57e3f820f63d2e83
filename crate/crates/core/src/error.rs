use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants split into two families: input validation (bad grids, bad
/// exponents, mismatched operands) and numerical failure (divergence,
/// aliasing, non-convergence). [`Error::is_numerical`] tells them apart; the
/// driver maps them to different exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("J undefined at zero")]
    ZeroField,

    #[error("nonzero mean under Riesz potential (|f^(0)| = {dc:e}, allowed {allowed:e})")]
    RieszMean { dc: f64, allowed: f64 },

    #[error("gaussian not resolvable on grid: {0}")]
    Unresolved(String),

    #[error("domain too small for requested times")]
    DomainTooSmall,

    #[error("minimization diverged: {0}")]
    Diverged(String),

    #[error("alignment did not converge after {evaluations} evaluations (best residual {best_residual:e} at lambda = {lambda}, x0 = {x0:?})")]
    AlignmentFailed {
        evaluations: usize,
        best_residual: f64,
        lambda: f64,
        x0: [f64; 2],
    },

    #[error("uncertainty floor violated at t = {t}: J = {value}, floor = {floor}")]
    FloorViolated { t: f64, value: f64, floor: f64 },

    #[error("degenerate denominator: {0}")]
    Degenerate(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RieszMean { .. }
                | Error::DomainTooSmall
                | Error::Diverged(_)
                | Error::AlignmentFailed { .. }
                | Error::FloorViolated { .. }
                | Error::Degenerate(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
