use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: leading minor {minor} has pivot {pivot:e}")]
    NotPositiveDefinite { minor: usize, pivot: f64 },

    #[error("covariance matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("mean of the denominator variable C is zero; the ratio is undefined")]
    DegenerateDenominator,

    #[error("need at least {needed} paired samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("variance of {0} is zero")]
    ZeroVariance(&'static str),

    #[error("ratio R is zero; coefficient formula divides by R")]
    ZeroRatio,

    #[error("control variates B and D are collinear (|corr| = {correlation}); use the linear_cv strategy")]
    CollinearControls { correlation: f64 },

    #[error("linear relation B = a*D + b needs a nonzero slope")]
    ZeroSlope,

    #[error("empty sample")]
    EmptySample,

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("assembled denominator estimate is exactly zero")]
    ZeroDenominator,

    #[error("estimator kind {0} needs the known means E[B] and E[D]")]
    MissingKnownMeans(&'static str),

    #[error("baseline variance is zero; RVR undefined")]
    ZeroBaseVariance,

    #[error("all {replications} replications failed")]
    AllReplicationsFailed { replications: usize },

    #[error("closed-form variance difference for {strategy} disagrees: generic {generic:e}, closed form {closed_form:e}")]
    ClosedFormMismatch {
        strategy: &'static str,
        generic: f64,
        closed_form: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("cannot parse row {row}, column `{column}`: {value:?}")]
    ParseFailure {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column `{column}`")]
    NonFiniteValue { row: usize, column: String },

    #[error("requested {requested} paired rows but only {available} are available")]
    InsufficientRows { requested: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
