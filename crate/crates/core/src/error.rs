use thiserror::Error;

/// Errors surfaced by the manifold, sampler, integrator and stats layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Constraint gradients are numerically rank deficient at a point.
    #[error("degenerate constraints: sigma_min/sigma_max = {ratio:.3e} below threshold {threshold:.3e}")]
    DegenerateConstraints { ratio: f64, threshold: f64 },

    /// An operation that needs samples received an empty list.
    #[error("empty sample set")]
    EmptySamples,

    /// A chain was asked to start from an infeasible point.
    #[error("infeasible start point: {0}")]
    InfeasibleStart(String),

    /// The shrinking search for the innermost ball radius underflowed.
    #[error("no valid innermost radius: shrank below {floor:.3e} (started at {start:.3e})")]
    NoValidRadius { start: f64, floor: f64 },

    /// A ratio stage produced no samples in the inner ball.
    #[error("stage {stage} failure: no samples landed in the inner ball (r_inner = {r_inner:.6e}); increase n per stage or reduce the volume ratio")]
    StageFailure { stage: usize, r_inner: f64 },

    /// A projection from the tangent disk failed during the innermost estimate.
    #[error("innermost estimate aborted: projection failure at draw {draw} of {total}")]
    InnermostProjectionFailure { draw: usize, total: usize },

    /// The tangent plane became degenerate to the patch (vanishing volume
    /// factor) during the innermost estimate.
    #[error("innermost estimate aborted: vanishing volume factor {value:.3e} at draw {draw}; the innermost radius is too large")]
    InnermostFold { draw: usize, value: f64 },

    /// A time series is statistically degenerate (zero static variance).
    #[error("degenerate series: zero static variance")]
    DegenerateSeries,

    /// A time series is too short for the requested estimator.
    #[error("series too short: length {len}, need at least {min}")]
    SeriesTooShort { len: usize, min: usize },

    /// Invalid argument combination.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
