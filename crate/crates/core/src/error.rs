use thiserror::Error;

/// Errors raised by the tilted-prior machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty mass: every log-weight is -inf or NaN")]
    EmptyMass,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample is not normalized; call normalize() first")]
    NotNormalized,

    #[error("grid quadrature supports at most 3 dimensions (got {dim}); use the Monte Carlo normalizer")]
    DimensionTooHigh { dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("derivative of log g is not finite in sufficient-statistic coordinate {k}")]
    NonFiniteDerivative { k: usize },

    #[error("likelihood has discrete data; derivatives in x are meaningless, build the tilt with tilt_from_suffstat")]
    DiscreteData,

    #[error("ratio undefined: approximate likelihood is zero where the exact one is positive")]
    RatioUndefined,

    #[error("membership violation: |t[{k}]| = {t_abs} exceeds epsilon[{k}] = {eps}")]
    MembershipViolation { k: usize, t_abs: f64, eps: f64 },

    #[error("members are not comparable: {0}")]
    NotComparable(String),

    #[error("hyperparameters outside the conjugate family: {0}")]
    InvalidHyper(String),

    #[error("normalizer is not finite (log E[w] = {log_normalizer}) for tilt magnitude |t| = {t_norm}")]
    NonFiniteNormalizer { log_normalizer: f64, t_norm: f64 },

    #[error("grid too narrow: it holds only {mass} of the probability mass")]
    GridTooNarrow { mass: f64 },

    #[error("operation requires a univariate density (got dimension {dim})")]
    NotUnivariate { dim: usize },

    #[error("MTP2 is trivial for univariate densities; use lr_order")]
    NotMultivariate,

    #[error("Kolmogorov distance is not monotone in t near t = {at}")]
    NonMonotoneDistance { at: f64, curve: Vec<(f64, f64)> },

    #[error("rejection ABC accepted nothing in {attempts} attempts (closest distance {min_distance})")]
    NoAcceptances { attempts: u64, min_distance: f64 },

    #[error("density cannot be sampled directly")]
    NotSampleable,

    #[error("sample too small: need at least {min}, got {got}")]
    SampleTooSmall { min: usize, got: usize },

    #[error("data file: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
