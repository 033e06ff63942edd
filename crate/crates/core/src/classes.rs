//! Classes of exponentially tilted priors.
//!
//! Every member of every class has the form
//!
//! ```text
//! π'(θ, t) = π(θ) · exp(sign · Σ_k h_k(θ) t_k) / E_π[exp(sign · Σ_k h_k(θ) t_k)]
//! ```
//!
//! and the classes differ only in where the tilt `h` comes from:
//!
//! | kind    | tilt `h(θ)`                                           | sign | bound      |
//! |---------|-------------------------------------------------------|------|------------|
//! | `Abc`   | `∂ log g(s|θ)/∂s` at the observed statistic `s(x⁰)`   | `+`  | `|t| ≤ ε`  |
//! | `AbcE`  | natural parameter `C(θ)` of an exponential family     | `+`  | `|t| ≤ ε`  |
//! | `AbcG`  | `∂ log f(x|θ)/∂x_i` at the observed data `x⁰`         | `−`  | `|t| ≤ ε`  |
//! | `Ab`    | `log f(x⁰|θ) − log f̃(x⁰|θ)`                           | `+`  | `t = 1`    |
//!
//! Members of the `AbcE` class coincide with conjugate priors whose second
//! hyperparameter is shifted, see [`conjugate_shift`].

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, DataVector, GridSpec, ParamPoint, SuffStat, MAX_QUADRATURE_DIM};

/// Likelihood expressed through a sufficient statistic: `g(s|θ)`.
pub trait SuffStatModel: Send + Sync {
    fn param_dim(&self) -> usize;

    fn stat_dim(&self) -> usize;

    fn suff_stat(&self, x: &DataVector) -> SuffStat;

    fn log_g(&self, s: &[f64], theta: &[f64]) -> f64;

    /// `∂ log g(s|θ) / ∂ s_k` for every `k`.
    fn dlogg_ds(&self, s: &[f64], theta: &[f64]) -> Vec<f64>;

    /// Parameter value at which derivatives are validated.
    fn reference_param(&self) -> Vec<f64>;
}

/// Conjugate hyperparameters `γ = (k, l)` of `π_γ(θ) ∝ A(θ)^k exp(C(θ)·l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateHyper {
    pub k: f64,
    pub l: Vec<f64>,
}

/// An exponential family `f(x|θ) = A(θ) B(x) exp(C(θ)·S(x))`, with the part of
/// `B` that depends on the data only through `S` split out as `B₀(S)`.
pub trait ExpFamily: Send + Sync {
    fn param_dim(&self) -> usize;

    fn stat_dim(&self) -> usize;

    fn log_a(&self, theta: &[f64]) -> f64;

    fn log_b0(&self, s: &[f64]) -> f64;

    fn dlog_b0_ds(&self, s: &[f64]) -> Vec<f64>;

    fn natural_param(&self, theta: &[f64]) -> Vec<f64>;

    fn suff_stat(&self, x: &DataVector) -> SuffStat;

    /// Closed-form, normalized and sampleable conjugate prior; errors when
    /// `hyper` is outside the family's valid region.
    fn conjugate_prior(&self, hyper: &ConjugateHyper) -> Result<Arc<dyn Density>>;

    fn reference_param(&self) -> Vec<f64>;
}

/// An exponential family paired with conjugate hyperparameters.
#[derive(Clone)]
pub struct ExpFamSpec {
    family: Arc<dyn ExpFamily>,
    hyper: ConjugateHyper,
}

impl fmt::Debug for ExpFamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpFamSpec").field("hyper", &self.hyper).finish_non_exhaustive()
    }
}

impl ExpFamSpec {
    pub fn new(family: Arc<dyn ExpFamily>, hyper: ConjugateHyper) -> Result<Self> {
        if hyper.l.len() != family.stat_dim() {
            return Err(Error::DimensionMismatch { expected: family.stat_dim(), got: hyper.l.len() });
        }
        family.conjugate_prior(&hyper)?;
        Ok(Self { family, hyper })
    }

    pub fn family(&self) -> &Arc<dyn ExpFamily> {
        &self.family
    }

    pub fn hyper(&self) -> &ConjugateHyper {
        &self.hyper
    }

    /// The conjugate prior `π_γ`.
    pub fn prior(&self) -> Result<Arc<dyn Density>> {
        self.family.conjugate_prior(&self.hyper)
    }

    /// `γ ↦ (k + 1, l + s)`: posterior hyperparameters after observing statistic `s`.
    pub fn posterior_hyper(&self, s: &[f64]) -> ConjugateHyper {
        ConjugateHyper {
            k: self.hyper.k + 1.0,
            l: self.hyper.l.iter().zip(s).map(|(l, s)| l + s).collect(),
        }
    }

    pub fn posterior(&self, s: &[f64]) -> Result<Arc<dyn Density>> {
        self.family.conjugate_prior(&self.posterior_hyper(s))
    }

    /// `log f` up to θ-free and S-free constants: `log A + log B₀(s) + C·s`.
    pub fn log_likelihood(&self, s: &[f64], theta: &[f64]) -> f64 {
        self.family.log_a(theta) + self.family.log_b0(s) + dot(&self.family.natural_param(theta), s)
    }

    /// Unnormalized conjugate log-density `k log A(θ) + C(θ)·l`.
    pub fn log_conjugate_kernel(&self, theta: &[f64]) -> f64 {
        self.hyper.k * self.family.log_a(theta) + dot(&self.family.natural_param(theta), &self.hyper.l)
    }

    /// Log prior-predictive density of the statistic `s`, via the identity
    /// `m(s) = g(s|θ*) π_γ(θ*) / π(θ*|s)` evaluated at the posterior mean.
    pub fn log_prior_predictive(&self, s: &[f64]) -> Result<f64> {
        let prior = self.prior()?;
        let post = self.posterior(s)?;
        let at = post
            .mean()
            .ok_or_else(|| Error::InvalidArgument("conjugate posterior has no mean".into()))?;
        Ok(self.log_likelihood(s, &at) + prior.log_pdf(&at) - post.log_pdf(&at))
    }
}

impl SuffStatModel for ExpFamSpec {
    fn param_dim(&self) -> usize {
        self.family.param_dim()
    }

    fn stat_dim(&self) -> usize {
        self.family.stat_dim()
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        self.family.suff_stat(x)
    }

    fn log_g(&self, s: &[f64], theta: &[f64]) -> f64 {
        self.log_likelihood(s, theta)
    }

    fn dlogg_ds(&self, s: &[f64], theta: &[f64]) -> Vec<f64> {
        let db0 = self.family.dlog_b0_ds(s);
        let c = self.family.natural_param(theta);
        db0.iter().zip(&c).map(|(a, b)| a + b).collect()
    }

    fn reference_param(&self) -> Vec<f64> {
        self.family.reference_param()
    }
}

/// Whether data are continuous (differentiable in `x`) or discrete.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Continuous,
    Discrete,
}

/// A full-data likelihood `f(x|θ)`.
pub trait Likelihood: Send + Sync {
    fn log_f(&self, x: &[f64], theta: &[f64]) -> f64;

    fn data_kind(&self) -> DataKind {
        DataKind::Continuous
    }

    /// Analytic `∂ log f/∂x_i`, if known. Finite differences are used otherwise.
    fn dlogf_dx(&self, _x: &[f64], _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn reference_param(&self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TiltProvenance {
    SuffStatDerivative,
    ExpFam,
    LikelihoodGeneral,
    LikelihoodRatio,
}

type TiltClosure = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A vector of tilt functions `h(θ) = (h_1(θ), …, h_m(θ))`.
#[derive(Clone)]
pub struct TiltFn {
    h: Arc<TiltClosure>,
    dim: usize,
    provenance: TiltProvenance,
}

impl fmt::Debug for TiltFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TiltFn")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl TiltFn {
    pub fn new(
        dim: usize,
        provenance: TiltProvenance,
        h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { h: Arc::new(h), dim, provenance }
    }

    pub fn scalar(provenance: TiltProvenance, h: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(1, provenance, move |theta| vec![h(theta)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn provenance(&self) -> TiltProvenance {
        self.provenance
    }

    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        (self.h)(theta)
    }

    /// `Σ_k h_k(θ) t_k`.
    pub fn dot(&self, theta: &[f64], t: &[f64]) -> f64 {
        dot(&self.eval(theta), t)
    }

    /// `-h`, with the same provenance.
    pub fn negated(&self) -> Self {
        let h = Arc::clone(&self.h);
        Self::new(self.dim, self.provenance, move |theta| h(theta).into_iter().map(|v| -v).collect())
    }

    /// The scalar tilt `h_k` alone.
    pub fn component(&self, k: usize) -> Result<Self> {
        if k >= self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: k + 1 });
        }
        let h = Arc::clone(&self.h);
        Ok(Self::scalar(self.provenance, move |theta| h(theta)[k]))
    }

    /// True when both refer to the same underlying function.
    pub fn same_as(&self, other: &TiltFn) -> bool {
        Arc::ptr_eq(&self.h, &other.h) && self.provenance == other.provenance
    }
}

/// Tilt construction from a sufficient-statistic model: `h_k(θ) = ∂ log g/∂s_k` at `s(x⁰)`.
pub fn tilt_from_suffstat(model: Arc<dyn SuffStatModel>, x0: &DataVector) -> Result<TiltFn> {
    let s0 = model.suff_stat(x0);
    let probe = model.dlogg_ds(s0.values(), &model.reference_param());
    if probe.len() != model.stat_dim() {
        return Err(Error::DimensionMismatch { expected: model.stat_dim(), got: probe.len() });
    }
    if let Some(k) = probe.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDerivative { k });
    }
    let dim = model.stat_dim();
    Ok(TiltFn::new(dim, TiltProvenance::SuffStatDerivative, move |theta| {
        model.dlogg_ds(s0.values(), theta)
    }))
}

/// Tilt of an exponential family: `h(θ) = B₀'(S(x⁰))/B₀(S(x⁰)) + C(θ)`.
///
/// The θ-free first term is kept; it cancels only under normalization.
pub fn tilt_from_expfam(spec: &ExpFamSpec, x0: &DataVector) -> Result<TiltFn> {
    let family = Arc::clone(spec.family());
    let s0 = family.suff_stat(x0);
    let db0 = family.dlog_b0_ds(s0.values());
    if let Some(k) = db0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDerivative { k });
    }
    let dim = family.stat_dim();
    Ok(TiltFn::new(dim, TiltProvenance::ExpFam, move |theta| {
        family.natural_param(theta).iter().zip(&db0).map(|(c, b)| c + b).collect()
    }))
}

/// The natural-parameter tilt `C(θ)` that generates conjugate shifts.
pub fn natural_tilt(spec: &ExpFamSpec) -> TiltFn {
    let family = Arc::clone(spec.family());
    let dim = family.stat_dim();
    TiltFn::new(dim, TiltProvenance::ExpFam, move |theta| family.natural_param(theta))
}

fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

fn finite_difference_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i]);
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn agrees(fd: f64, analytic: f64, rel_tol: f64) -> bool {
    (fd - analytic).abs() <= rel_tol * analytic.abs().max(1.0)
}

/// Checks `dlogg_ds` against central finite differences of `log_g`; returns the
/// worst scaled discrepancy.
pub fn check_suffstat_derivative(
    model: &dyn SuffStatModel,
    s: &[f64],
    thetas: &[ParamPoint],
    rel_tol: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for theta in thetas {
        let fd = finite_difference_grad(|s| model.log_g(s, theta), s);
        let an = model.dlogg_ds(s, theta);
        for (k, (a, b)) in fd.iter().zip(&an).enumerate() {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
            if !agrees(*a, *b, rel_tol) {
                return Err(Error::InvalidArgument(format!(
                    "dlogg_ds[{k}] = {b} disagrees with finite difference {a} at θ = {:?}",
                    theta.coords()
                )));
            }
        }
    }
    Ok(worst)
}

/// General-likelihood tilt `k_i(θ) = ∂ log f(x|θ)/∂x_i` at `x⁰`. Members of the
/// resulting class enter with a negative sign.
pub fn tilt_from_likelihood(loglik: Arc<dyn Likelihood>, x0: &DataVector) -> Result<TiltFn> {
    if loglik.data_kind() == DataKind::Discrete {
        return Err(Error::DiscreteData);
    }
    let x0 = x0.values().to_vec();
    let reference = loglik.reference_param();
    let fd = finite_difference_grad(|x| loglik.log_f(x, &reference), &x0);
    if let Some(i) = fd.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDerivative { k: i });
    }
    let analytic = loglik.dlogf_dx(&x0, &reference);
    if let Some(an) = &analytic {
        if an.len() != x0.len() {
            return Err(Error::DimensionMismatch { expected: x0.len(), got: an.len() });
        }
        for (i, (a, b)) in fd.iter().zip(an).enumerate() {
            if !agrees(*a, *b, 1e-5) {
                return Err(Error::InvalidArgument(format!(
                    "dlogf_dx[{i}] = {b} disagrees with finite difference {a}"
                )));
            }
        }
    }
    let dim = x0.len();
    let use_analytic = analytic.is_some();
    Ok(TiltFn::new(dim, TiltProvenance::LikelihoodGeneral, move |theta| {
        if use_analytic {
            if let Some(d) = loglik.dlogf_dx(&x0, theta) {
                return d;
            }
        }
        finite_difference_grad(|x| loglik.log_f(x, theta), &x0)
    }))
}

/// Ratio tilt `h(θ) = log f(x⁰|θ) − log f̃(x⁰|θ)` absorbing an approximate likelihood.
pub fn tilt_from_likelihood_ratio(
    log_f: Arc<dyn Likelihood>,
    log_f_tilde: Arc<dyn Likelihood>,
    x0: &DataVector,
) -> Result<TiltFn> {
    let x0 = x0.values().to_vec();
    for reference in [log_f.reference_param(), log_f_tilde.reference_param()] {
        let (a, b) = (log_f.log_f(&x0, &reference), log_f_tilde.log_f(&x0, &reference));
        if a > f64::NEG_INFINITY && b == f64::NEG_INFINITY {
            return Err(Error::RatioUndefined);
        }
    }
    Ok(TiltFn::scalar(TiltProvenance::LikelihoodRatio, move |theta| {
        log_f.log_f(&x0, theta) - log_f_tilde.log_f(&x0, theta)
    }))
}

/// How member normalizers `E_π[exp(sign·h·t)]` are computed.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerConfig {
    /// Trapezoid points per axis for dimensions 1, 2 and 3.
    pub points_per_axis: [usize; MAX_QUADRATURE_DIM],
    /// Log-integrand drop, relative to its maximum, below which a box face is negligible.
    pub edge_drop: f64,
    /// Monte Carlo draws from the base prior above three dimensions.
    pub mc_draws: usize,
    pub mc_seed: u64,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self {
            points_per_axis: [8001, 401, 81],
            edge_drop: 40.0,
            mc_draws: 200_000,
            mc_seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ClassKind {
    Abc,
    AbcE,
    AbcG,
    Ab,
}

impl ClassKind {
    pub fn sign(self) -> f64 {
        match self {
            ClassKind::AbcG => -1.0,
            _ => 1.0,
        }
    }
}

/// One member `π'(·, t)` of a class.
pub struct TiltedPrior {
    base: Arc<dyn Density>,
    tilt: TiltFn,
    t: Vec<f64>,
    sign: f64,
    config: NormalizerConfig,
    log_normalizer: OnceLock<f64>,
}

impl fmt::Debug for TiltedPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TiltedPrior")
            .field("t", &self.t)
            .field("sign", &self.sign)
            .field("tilt", &self.tilt)
            .field("log_normalizer", &self.log_normalizer.get())
            .finish_non_exhaustive()
    }
}

impl Clone for TiltedPrior {
    fn clone(&self) -> Self {
        let log_normalizer = OnceLock::new();
        if let Some(v) = self.log_normalizer.get() {
            let _ = log_normalizer.set(*v);
        }
        Self {
            base: Arc::clone(&self.base),
            tilt: self.tilt.clone(),
            t: self.t.clone(),
            sign: self.sign,
            config: self.config.clone(),
            log_normalizer,
        }
    }
}

impl TiltedPrior {
    pub fn new(base: Arc<dyn Density>, tilt: TiltFn, t: Vec<f64>, sign: f64, config: NormalizerConfig) -> Result<Self> {
        if t.len() != tilt.dim() {
            return Err(Error::DimensionMismatch { expected: tilt.dim(), got: t.len() });
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("tilt magnitudes must be finite".into()));
        }
        Ok(Self { base, tilt, t, sign, config, log_normalizer: OnceLock::new() })
    }

    pub fn base(&self) -> &Arc<dyn Density> {
        &self.base
    }

    pub fn tilt(&self) -> &TiltFn {
        &self.tilt
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// `sign · Σ h_k(θ) t_k`.
    pub fn log_weight(&self, theta: &[f64]) -> f64 {
        if self.t.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        self.sign * self.tilt.dot(theta, &self.t)
    }

    /// `log π(θ) + sign · Σ h_k(θ) t_k`.
    pub fn log_unnormalized(&self, theta: &[f64]) -> f64 {
        let lp = self.base.log_pdf(theta);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_weight(theta)
    }

    /// Cached `log ∫ π(θ) exp(sign·h(θ)·t) dθ`; equals `log E_π[w_t]` for a normalized base.
    pub fn log_normalizer(&self) -> Result<f64> {
        if let Some(v) = self.log_normalizer.get() {
            return Ok(*v);
        }
        let value = if self.t.iter().all(|v| *v == 0.0) && self.base.is_normalized() {
            0.0
        } else if self.base.dim() <= MAX_QUADRATURE_DIM {
            self.quadrature_log_normalizer()?
        } else {
            self.monte_carlo_log_normalizer()?
        };
        if !value.is_finite() {
            return Err(Error::NonFiniteNormalizer {
                log_normalizer: value,
                t_norm: self.t.iter().map(|v| v * v).sum::<f64>().sqrt(),
            });
        }
        // Single assignment: concurrent first computations agree, the first one is kept.
        let _ = self.log_normalizer.set(value);
        Ok(*self.log_normalizer.get().unwrap_or(&value))
    }

    /// Box covering the member's mass: the base's effective box, pushed
    /// outwards while a face still carries non-negligible log-integrand.
    pub fn integration_bounds(&self) -> Result<Vec<(f64, f64)>> {
        let dim = self.base.dim();
        let support = self.base.support();
        let mut bounds = self.base.effective_bounds()?;
        let probe_points = [401usize, 61, 21][dim - 1];
        for _ in 0..12 {
            let grid = GridSpec::from_bounds(&bounds, probe_points)?;
            let nodes = grid.weighted_nodes()?;
            let values: Vec<f64> = nodes.iter().map(|(th, _)| self.log_unnormalized(th)).collect();
            let max = values.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
            if !max.is_finite() {
                break;
            }
            let mut grew = false;
            let mut next = bounds.clone();
            for d in 0..dim {
                let (lo, hi) = bounds[d];
                let width = hi - lo;
                let face_max = |at: f64| {
                    nodes
                        .iter()
                        .zip(&values)
                        .filter(|((th, _), _)| th[d] == at)
                        .map(|(_, v)| *v)
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                if lo > support[d].0 && face_max(lo) > max - self.config.edge_drop {
                    next[d].0 = (lo - width).max(support[d].0);
                    grew = true;
                }
                if hi < support[d].1 && face_max(hi) > max - self.config.edge_drop {
                    next[d].1 = (hi + width).min(support[d].1);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
            bounds = next;
        }
        Ok(bounds)
    }

    /// Tensor trapezoid rule in transformed coordinates: axes that end on a
    /// finite support edge are mapped to the whole line first, so densities
    /// that are positive or singular at the edge are integrated accurately.
    fn quadrature_log_normalizer(&self) -> Result<f64> {
        let bounds = self.integration_bounds()?;
        let support = self.base.support();
        let points = self.config.points_per_axis[self.base.dim() - 1];
        let axes: Vec<AxisRule> = bounds
            .iter()
            .zip(&support)
            .map(|(&b, &s)| axis_rule(b, s, points))
            .collect::<Result<_>>()?;
        let rules: Vec<&Vec<(f64, f64)>> = axes.iter().map(|a| &a.nodes).collect();
        let mut terms = Vec::with_capacity(rules.iter().map(|r| r.len()).product());
        let mut idx = vec![0usize; rules.len()];
        let mut theta = vec![0.0; rules.len()];
        'outer: loop {
            let mut lw = 0.0;
            for (d, &i) in idx.iter().enumerate() {
                theta[d] = rules[d][i].0;
                lw += rules[d][i].1;
            }
            let v = self.log_unnormalized(&theta);
            if v.is_nan() {
                return Err(Error::InvalidArgument("log-integrand is NaN on the grid".into()));
            }
            terms.push(v + lw);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < rules[d].len() {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        let total = log_sum_exp(&terms)?;
        let mut parts = self.edge_tails(&axes, &terms, total)?;
        parts.push(total);
        log_sum_exp(&parts)
    }

    /// Log-mass beyond each truncated support edge.
    ///
    /// In transformed coordinates the integrand must fall off toward every such
    /// edge; otherwise the member is not integrable there. When it does, the
    /// fall-off is close to exponential (a power law in `θ`), and the tail past
    /// the outermost node is `g₁ e^{−a·h} / a` with `a` the log-slope between the
    /// two inner nodes. Slow power laws leave mass outside any fixed cut-off.
    fn edge_tails(&self, axes: &[AxisRule], terms: &[f64], total: f64) -> Result<Vec<f64>> {
        let mut tails = Vec::new();
        for (d, axis) in axes.iter().enumerate() {
            if axis.edges.is_empty() {
                continue;
            }
            let stride: usize = axes[d + 1..].iter().map(|a| a.nodes.len()).product();
            let len = axis.nodes.len();
            let mut marginal = vec![Vec::new(); len];
            for (flat, v) in terms.iter().enumerate() {
                marginal[(flat / stride) % len].push(*v);
            }
            for &(edge, next) in &axis.edges {
                let at_edge = log_sum_exp(&marginal[edge]).unwrap_or(f64::NEG_INFINITY);
                let inward = log_sum_exp(&marginal[next]).unwrap_or(f64::NEG_INFINITY);
                if at_edge == f64::NEG_INFINITY {
                    continue;
                }
                if at_edge >= inward {
                    if at_edge - total > EDGE_MASS_LOG_TOL {
                        let t_norm = self.t.iter().map(|v| v * v).sum::<f64>().sqrt();
                        return Err(Error::NonFiniteNormalizer { log_normalizer: f64::INFINITY, t_norm });
                    }
                    continue;
                }
                let h = axis.step;
                let a = (inward - at_edge) / h;
                tails.push(at_edge - h.ln() - a * h - a.ln());
            }
        }
        Ok(tails)
    }

    fn monte_carlo_log_normalizer(&self) -> Result<f64> {
        if !self.base.is_normalized() {
            return Err(Error::InvalidArgument("Monte Carlo normalizer needs a normalized base prior".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.mc_seed);
        let n = self.config.mc_draws.max(1);
        let mut terms = Vec::with_capacity(n);
        for _ in 0..n {
            let theta = self.base.sample(&mut rng)?;
            terms.push(self.log_weight(&theta));
        }
        Ok(log_sum_exp(&terms)? - (n as f64).ln())
    }

    /// Member log-density at `theta`, optionally normalized.
    pub fn member_log_pdf(&self, theta: &[f64], normalized: bool) -> Result<f64> {
        if theta.len() != self.base.dim() {
            return Err(Error::DimensionMismatch { expected: self.base.dim(), got: theta.len() });
        }
        let raw = self.log_unnormalized(theta);
        if normalized {
            Ok(raw - self.log_normalizer()?)
        } else {
            Ok(raw)
        }
    }
}

/// Smallest distance to a finite support edge resolved by the transformed rules,
/// relative to the axis width.
const EDGE_RESOLUTION: f64 = 1e-30;

/// Log relative mass at a truncated edge above which a rising integrand means divergence.
const EDGE_MASS_LOG_TOL: f64 = -27.6;

/// Nodes and log-weights on one axis. Trapezoid in `θ` for interior boxes,
/// in `u = ln(θ − a)` (or `ln(b − θ)`) when one end is a support edge and in
/// the logit of `(θ − a)/(b − a)` when both are.
/// Nodes `(θ, ln weight)` of one axis, and `(edge, inward neighbour)` index
/// pairs at the support edges reached through a transform, with the node
/// spacing `step` in the transformed coordinate.
struct AxisRule {
    nodes: Vec<(f64, f64)>,
    edges: Vec<(usize, usize)>,
    step: f64,
}

fn axis_rule(bounds: (f64, f64), support: (f64, f64), points: usize) -> Result<AxisRule> {
    let (lo, hi) = bounds;
    let at_lo = support.0.is_finite() && lo <= support.0;
    let at_hi = support.1.is_finite() && hi >= support.1;
    let width = hi - lo;
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::InvalidArgument(format!("integration box axis {lo} .. {hi} is empty")));
    }
    let inside = |th: f64| th > support.0 && th < support.1;
    let trapezoid = |a: f64, b: f64, map: &dyn Fn(f64) -> (f64, f64)| -> Vec<(f64, f64)> {
        let h = (b - a) / (points - 1) as f64;
        (0..points)
            .filter_map(|i| {
                let u = a + h * i as f64;
                let end = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
                let (th, log_jac) = map(u);
                (inside(th) || !(at_lo || at_hi)).then_some((th, log_jac + (end * h).ln()))
            })
            .collect()
    };
    let log_span = -EDGE_RESOLUTION.ln();
    let step = match (at_lo, at_hi) {
        (false, false) => width,
        (true, true) => 2.0 * log_span,
        _ => log_span,
    } / (points - 1) as f64;
    let rule = match (at_lo, at_hi) {
        (false, false) => trapezoid(lo, hi, &|u| (u, 0.0)),
        (true, false) => trapezoid((EDGE_RESOLUTION * width).ln(), width.ln(), &|u| (lo + u.exp(), u)),
        (false, true) => trapezoid((EDGE_RESOLUTION * width).ln(), width.ln(), &|u| (hi - u.exp(), u)),
        (true, true) => {
            let a = EDGE_RESOLUTION.ln();
            trapezoid(a, -a, &|u| {
                // θ = lo + width·σ(u), dθ/du = width·σ(u)σ(−u).
                let log_sig = -(-u).exp().ln_1p();
                let log_sig_neg = -u.exp().ln_1p();
                (lo + width * log_sig.exp(), width.ln() + log_sig + log_sig_neg)
            })
        }
    };
    let n = rule.len();
    // The outermost node carries half weight, so compare the next two.
    let edges = match (at_lo, at_hi) {
        _ if n < 4 => Vec::new(),
        (false, false) => Vec::new(),
        (true, true) => vec![(1, 2), (n - 2, n - 3)],
        _ => vec![(1, 2)],
    };
    Ok(AxisRule { nodes: rule, edges, step })
}

/// Free-function form of [`TiltedPrior::member_log_pdf`].
pub fn member_log_pdf(member: &TiltedPrior, theta: &ParamPoint, normalized: bool) -> Result<f64> {
    member.member_log_pdf(theta, normalized)
}

impl Density for TiltedPrior {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Normalized member log-density; NaN if the normalizer cannot be computed.
    fn log_pdf(&self, theta: &[f64]) -> f64 {
        match self.log_normalizer() {
            Ok(z) => self.log_unnormalized(theta) - z,
            Err(_) => f64::NAN,
        }
    }

    fn support(&self) -> Vec<(f64, f64)> {
        self.base.support()
    }

    fn effective_bounds(&self) -> Result<Vec<(f64, f64)>> {
        self.integration_bounds()
    }
}

/// A class `Γ` of tilted priors around a base prior.
#[derive(Clone)]
pub struct PriorClass {
    kind: ClassKind,
    base: Arc<dyn Density>,
    tilt: TiltFn,
    epsilon: Option<Vec<f64>>,
    expfam: Option<ExpFamSpec>,
    normalizer: NormalizerConfig,
}

impl fmt::Debug for PriorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorClass")
            .field("kind", &self.kind)
            .field("epsilon", &self.epsilon)
            .field("tilt", &self.tilt)
            .finish_non_exhaustive()
    }
}

fn check_epsilon(epsilon: &[f64], dim: usize) -> Result<()> {
    if epsilon.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: epsilon.len() });
    }
    if let Some(k) = epsilon.iter().position(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidArgument(format!("epsilon[{k}] must be finite and > 0")));
    }
    Ok(())
}

impl PriorClass {
    fn with_kind(kind: ClassKind, base: Arc<dyn Density>, tilt: TiltFn, epsilon: Option<Vec<f64>>) -> Result<Self> {
        if let Some(eps) = &epsilon {
            check_epsilon(eps, tilt.dim())?;
        }
        Ok(Self { kind, base, tilt, epsilon, expfam: None, normalizer: NormalizerConfig::default() })
    }

    /// The ABC class Γ_ε.
    pub fn abc(base: Arc<dyn Density>, tilt: TiltFn, epsilon: Vec<f64>) -> Result<Self> {
        Self::with_kind(ClassKind::Abc, base, tilt, Some(epsilon))
    }

    /// The ABC-E class Γ_ε^E of conjugate priors with shifted `l`.
    pub fn abc_e(spec: &ExpFamSpec, epsilon: Vec<f64>) -> Result<Self> {
        let mut class = Self::with_kind(ClassKind::AbcE, spec.prior()?, natural_tilt(spec), Some(epsilon))?;
        class.expfam = Some(spec.clone());
        Ok(class)
    }

    /// The general class Γ_ε^G (tilt enters with a negative sign).
    pub fn abc_g(base: Arc<dyn Density>, tilt: TiltFn, epsilon: Vec<f64>) -> Result<Self> {
        Self::with_kind(ClassKind::AbcG, base, tilt, Some(epsilon))
    }

    /// The approximate-Bayes class Γ^A; it has a single member at `t = 1`.
    pub fn ab(base: Arc<dyn Density>, tilt: TiltFn) -> Result<Self> {
        if tilt.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: tilt.dim() });
        }
        Self::with_kind(ClassKind::Ab, base, tilt, None)
    }

    pub fn with_normalizer(mut self, config: NormalizerConfig) -> Self {
        self.normalizer = config;
        self
    }

    /// Same base and tilt with a different bound.
    pub fn with_epsilon(&self, epsilon: Vec<f64>) -> Result<Self> {
        if self.kind == ClassKind::Ab {
            return Err(Error::InvalidArgument("the AB class carries no epsilon".into()));
        }
        check_epsilon(&epsilon, self.tilt.dim())?;
        Ok(Self { epsilon: Some(epsilon), ..self.clone() })
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn base(&self) -> &Arc<dyn Density> {
        &self.base
    }

    pub fn tilt(&self) -> &TiltFn {
        &self.tilt
    }

    pub fn epsilon(&self) -> Option<&[f64]> {
        self.epsilon.as_deref()
    }

    pub fn expfam(&self) -> Option<&ExpFamSpec> {
        self.expfam.as_ref()
    }

    pub fn normalizer(&self) -> &NormalizerConfig {
        &self.normalizer
    }

    /// Builds the member at tilt magnitude `t`.
    pub fn make_member(&self, t: &[f64]) -> Result<TiltedPrior> {
        if t.len() != self.tilt.dim() {
            return Err(Error::DimensionMismatch { expected: self.tilt.dim(), got: t.len() });
        }
        match &self.epsilon {
            Some(eps) => {
                if let Some(k) = t.iter().zip(eps).position(|(t, e)| t.abs() > *e) {
                    return Err(Error::MembershipViolation { k, t_abs: t[k].abs(), eps: eps[k] });
                }
            }
            None => {
                if t.iter().any(|v| *v != 1.0) {
                    return Err(Error::InvalidArgument("AB members are fixed at t = 1".into()));
                }
                self.check_ratio_finite()?;
            }
        }
        TiltedPrior::new(
            Arc::clone(&self.base),
            self.tilt.clone(),
            t.to_vec(),
            self.kind.sign(),
            self.normalizer.clone(),
        )
    }

    fn check_ratio_finite(&self) -> Result<()> {
        if self.base.dim() > MAX_QUADRATURE_DIM {
            return Ok(());
        }
        let points = [201usize, 21, 9][self.base.dim() - 1];
        let grid = GridSpec::from_bounds(&self.base.effective_bounds()?, points)?;
        for (theta, _) in grid.weighted_nodes()? {
            if self.base.log_pdf(&theta) == f64::NEG_INFINITY {
                continue;
            }
            if self.tilt.eval(&theta).iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Error::RatioUndefined);
            }
        }
        Ok(())
    }

    /// Whether `member` lies in this class: `|t_k| ≤ ε_k` for every `k`.
    pub fn contains(&self, member: &TiltedPrior) -> Result<bool> {
        if !Arc::ptr_eq(&self.base, &member.base) {
            return Err(Error::NotComparable("member was built over a different base prior".into()));
        }
        if !self.tilt.same_as(&member.tilt) || self.kind.sign() != member.sign {
            return Err(Error::NotComparable("member was built with a different tilt".into()));
        }
        Ok(match &self.epsilon {
            Some(eps) => member.t.iter().zip(eps).all(|(t, e)| t.abs() <= *e),
            None => member.t.iter().all(|v| *v == 1.0),
        })
    }
}

/// Free-function form of [`PriorClass::make_member`].
pub fn make_member(class: &PriorClass, t: &[f64]) -> Result<TiltedPrior> {
    class.make_member(t)
}

/// Free-function form of [`PriorClass::contains`].
pub fn class_contains(class: &PriorClass, member: &TiltedPrior) -> Result<bool> {
    class.contains(member)
}

/// The Γ_ε^E member for shift `t`: hyperparameters `(k, l + t)`.
pub fn conjugate_shift(spec: &ExpFamSpec, t: &[f64]) -> Result<ExpFamSpec> {
    let l = &spec.hyper().l;
    if t.len() != l.len() {
        return Err(Error::DimensionMismatch { expected: l.len(), got: t.len() });
    }
    let hyper = ConjugateHyper {
        k: spec.hyper().k,
        l: l.iter().zip(t).map(|(l, t)| l + t).collect(),
    };
    ExpFamSpec::new(Arc::clone(spec.family()), hyper)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
