//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Evaluation point coincides with a pole within machine tolerance.
    #[error("evaluation point hits pole {index} within machine tolerance")]
    PoleHit { index: usize },

    /// The tail model cannot bound the truncation remainder at this point.
    #[error("tail model cannot bound the remainder at |z| = {z_abs}")]
    TailUnbounded { z_abs: f64 },

    /// Neighborhood radius below the admissible threshold.
    #[error("radius {r} below threshold {threshold}")]
    RadiusTooSmall { r: f64, threshold: f64 },

    /// No explicit pole with this index.
    #[error("unknown pole index {index}")]
    UnknownPole { index: usize },

    /// Newton iteration failed to reach the residual target.
    #[error("Newton iteration did not converge (pole {index}, |w| = {w_abs})")]
    NoConvergence { index: usize, w_abs: f64 },

    /// Two inverse-branch seeds converged to the same point.
    #[error("branch seeds collided for pole {index}")]
    BranchCollision { index: usize },

    /// Invalid family parameter.
    #[error("bad parameter: {0}")]
    BadParameter(String),

    /// Multiplicity restriction excludes every pole.
    #[error("multiplicity cap {cap} excludes every pole")]
    EmptyRestriction { cap: u32 },

    /// The tail model cannot decide convergence.
    #[error("tail model cannot decide convergence")]
    Inconclusive,

    /// Custom field without a declared singular-value bound.
    #[error("no singular-value bound declared for this field")]
    NoSingularBound,

    /// No scanned cone contains enough maximal-multiplicity poles.
    #[error("no cone contains maximal-multiplicity poles")]
    NoMaxPolesInAnyCone,

    /// Point outside the conjugated domain.
    #[error("point outside the conjugated domain")]
    OutOfDomain,

    /// Explicit weights ran out before the schedule was complete.
    #[error("weight pool exhausted at level {level} (t = {t})")]
    PoolExhausted { level: usize, t: f64 },

    /// Too few points or scales for a slope estimate.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Pipeline stage unavailable for this field (e.g. all pool weights underflow).
    #[error("pipeline unavailable: {0}")]
    PipelineUnavailable(String),
}
