//! Exponentially tilted prior classes and the samplers built on them.
//!
//! A perturbation of the data in approximate Bayesian computation can be moved
//! onto the prior: `π(θ) g(s(x')|θ) ∝ π'(θ) g(s(x⁰)|θ)` where `π'` is `π` tilted
//! by `exp(h(θ) t)`. This crate builds those tilted classes, checks their
//! ordering and distance properties, and samples from them.

pub mod classes;
pub mod density;
pub mod duality;
pub mod error;
pub mod kolmogorov;
pub mod models;
pub mod numeric;
pub mod ordering;
pub mod samplers;

pub use classes::{
    class_contains, conjugate_shift, make_member, member_log_pdf, tilt_from_expfam, tilt_from_likelihood,
    tilt_from_likelihood_ratio, tilt_from_suffstat, ClassKind, ConjugateHyper, ExpFamSpec, ExpFamily, Likelihood,
    PriorClass, SuffStatModel, TiltFn, TiltProvenance, TiltedPrior,
};
pub use density::Density;
pub use error::{Error, Result};
pub use numeric::{DataVector, GridSpec, ParamPoint, SuffStat, WeightedSample};
pub use samplers::RngSeed;
