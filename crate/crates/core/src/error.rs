//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by distortion evaluation, surface fitting and allocation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A task's uncompressed baseline performance is zero, so the relative
    /// performance drop is undefined.
    #[error("task {task_id}: baseline performance is zero, relative distortion is undefined")]
    ZeroBaseline { task_id: usize },

    /// A value that must be finite (rate, distortion, weight, parameter) is not.
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },

    /// Two vectors that must share a length do not.
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Task weights must be strictly positive.
    #[error("weight {index} is {value}; task weights must be strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },

    /// Surface parameters alpha_j and beta_j must be strictly positive.
    #[error("surface parameter {name}[{index}] is {value}; must be strictly positive")]
    NonPositiveParam {
        name: &'static str,
        index: usize,
        value: f64,
    },

    /// Measured rates must be nonnegative.
    #[error("rate {index} is {value}; rates must be nonnegative")]
    NegativeRate { index: usize, value: f64 },

    /// A rate budget must be nonnegative.
    #[error("budget is {0}; must be nonnegative")]
    NegativeBudget(f64),

    /// Fitting needs at least one sample per free parameter.
    #[error("need at least {needed} samples (one per free parameter), got {got}")]
    TooFewSamples { needed: usize, got: usize },

    /// A rate coordinate never varies across the samples, so the surface is
    /// unidentifiable along that stream. `index` is zero-based; the message
    /// names the column as it appears in the data header.
    #[error("rate column R_{} is constant across all samples; cannot fit its decay", index + 1)]
    DegenerateDesign { index: usize },

    /// All observed distortions are identical and the candidate parameters do
    /// not reproduce them exactly, so R^2 has no defined value.
    #[error("R^2 undefined: samples have zero variance but residuals are nonzero")]
    UndefinedRSquared,

    /// The sample set is empty.
    #[error("sample set is empty")]
    EmptySamples,

    /// Allocation over zero streams is meaningless.
    #[error("stream count must be at least 1")]
    NoStreams,

    /// Proportional allocation with an all-zero share vector is meaningless.
    #[error("proportional shares are all zero")]
    AllZeroShares,

    /// Stream statistics must have positive element counts.
    #[error("stream {index} has zero elements")]
    ZeroElementCount { index: usize },

    /// Stream statistics must have nonnegative variances.
    #[error("stream {index} has negative variance {value}")]
    NegativeVariance { index: usize, value: f64 },

    /// Exhaustive search cost grows exponentially with the stream count.
    #[error("grid search supports at most {max} streams, got {got}")]
    UnsupportedDimension { max: usize, got: usize },

    /// Grid search needs a positive lattice step.
    #[error("grid step is {0}; must be strictly positive")]
    NonPositiveStep(f64),

    /// A synthetic task model would produce negative distortion somewhere on
    /// the sampled region.
    #[error("synthetic task {task_id}: distortion model parameter {what} is invalid ({value})")]
    InvalidTaskModel {
        task_id: usize,
        what: &'static str,
        value: f64,
    },

    /// Synthetic generation needs at least one task model.
    #[error("no task models given")]
    NoTasks,

    /// Sampling noise must be nonnegative.
    #[error("noise sigma is {0}; must be nonnegative")]
    NegativeNoise(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
