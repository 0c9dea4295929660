//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors produced by surface construction, fitting, allocation, and
/// Pareto-set operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector argument did not have the expected number of components.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A value violated its domain constraint (negative rate, nonpositive
    /// decay, malformed range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Baseline accuracy of zero; the relative performance drop is undefined.
    #[error("baseline accuracy must be nonzero")]
    ZeroBaselineAccuracy,

    /// The total rate budget must be strictly positive.
    #[error("total rate must be positive, got {0}")]
    NonPositiveTotalRate(f64),

    /// Task weights must be nonnegative and sum to one.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Fewer samples than the fit has unknowns.
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// All measured values identical; the coefficient of determination is
    /// undefined (zero total variance).
    #[error("zero total variance: all measured values are identical")]
    ZeroTotalVariance,

    /// A task's mean distortion is zero, so inverse-distortion weights are
    /// undefined.
    #[error("zero mean distortion for task {0}")]
    ZeroMeanDistortion(usize),

    /// The budget plane does not intersect the rate box.
    #[error("budget plane does not intersect the rate box")]
    EmptyIntersection,
}

pub type Result<T> = std::result::Result<T, Error>;
