//! Prior densities.
//!
//! A [`Density`] is evaluated in log space and declares its hard support plus
//! a finite "effective" box used for grids. For unbounded coordinates the
//! effective box is `mean ± TRUNCATION_SDS · sd`, clipped to the support; wrap
//! a density in [`WithBounds`] to override it.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::Distribution;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default truncation of unbounded priors, in prior standard deviations.
pub const TRUNCATION_SDS: f64 = 12.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub trait Density: Send + Sync {
    fn dim(&self) -> usize;

    /// Log-density at `theta`; `-inf` outside the support.
    fn log_pdf(&self, theta: &[f64]) -> f64;

    /// Hard support, one `(lower, upper)` pair per coordinate.
    fn support(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim()]
    }

    fn mean(&self) -> Option<Vec<f64>> {
        None
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        None
    }

    /// Whether `exp(log_pdf)` integrates to one.
    fn is_normalized(&self) -> bool {
        true
    }

    /// Finite box holding all but a negligible part of the mass.
    fn effective_bounds(&self) -> Result<Vec<(f64, f64)>> {
        default_effective_bounds(&self.support(), self.mean(), self.std_dev())
    }

    /// Draws one point. Only directly sampleable densities override this.
    fn sample(&self, _rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Err(Error::NotSampleable)
    }
}

fn default_effective_bounds(
    support: &[(f64, f64)],
    mean: Option<Vec<f64>>,
    sd: Option<Vec<f64>>,
) -> Result<Vec<(f64, f64)>> {
    support
        .iter()
        .enumerate()
        .map(|(d, &(lo, hi))| {
            if lo.is_finite() && hi.is_finite() {
                return Ok((lo, hi));
            }
            let (m, s) = match (&mean, &sd) {
                (Some(m), Some(s)) => (m[d], s[d]),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "coordinate {d} is unbounded and the density has no moments; wrap it in WithBounds"
                    )))
                }
            };
            Ok(((m - TRUNCATION_SDS * s).max(lo), (m + TRUNCATION_SDS * s).min(hi)))
        })
        .collect()
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `exp(log_pdf)` at a grid node. At a finite support edge where the
/// log-density is not finite the one-sided limit is used instead, so that
/// members positive at the edge keep their boundary value.
pub fn grid_pdf(d: &dyn Density, theta: &[f64]) -> f64 {
    let lp = d.log_pdf(theta);
    if lp.is_finite() {
        return lp.exp();
    }
    let support = d.support();
    let mut inner = theta.to_vec();
    let mut on_edge = false;
    for (x, (lo, hi)) in inner.iter_mut().zip(&support) {
        let step = 1e-9 * x.abs().max(1.0);
        if *x == *lo {
            *x += step;
            on_edge = true;
        } else if *x == *hi {
            *x -= step;
            on_edge = true;
        }
    }
    if !on_edge {
        return 0.0;
    }
    let lp = d.log_pdf(&inner);
    if lp.is_finite() {
        lp.exp()
    } else {
        0.0
    }
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // One Newton step on Φ(x) = p tightens the inverse to near machine precision.
    let dens = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if dens > 1e-300 {
        x - (std_normal_cdf(x) - p) / dens
    } else {
        x
    }
}

/// Univariate normal `N(mean, sd²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    mean: f64,
    sd: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(Error::InvalidArgument(format!("normal needs finite mean and sd > 0 (got {mean}, {sd})")));
        }
        Ok(Self { mean, sd })
    }

    pub fn from_variance(mean: f64, variance: f64) -> Result<Self> {
        Self::new(mean, variance.sqrt())
    }

    pub fn location(&self) -> f64 {
        self.mean
    }

    pub fn scale(&self) -> f64 {
        self.sd
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        -0.5 * z * z - self.sd.ln() - 0.5 * LN_2PI
    }

    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mean) / self.sd)
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        self.mean + self.sd * z
    }
}

impl Density for Normal {
    fn dim(&self) -> usize {
        1
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.ln_pdf(theta[0])
    }

    fn mean(&self) -> Option<Vec<f64>> {
        Some(vec![self.mean])
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        Some(vec![self.sd])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(vec![self.draw(rng)])
    }
}

/// `Gamma(shape, rate)` on `(0, ∞)`.
#[derive(Debug, Clone, Copy)]
pub struct Gamma {
    shape: f64,
    rate: f64,
    sampler: rand_distr::Gamma<f64>,
}

impl PartialEq for Gamma {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.rate == other.rate
    }
}

impl Gamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape.is_finite() && rate.is_finite() && shape > 0.0 && rate > 0.0) {
            return Err(Error::InvalidHyper(format!("gamma needs shape > 0 and rate > 0 (got {shape}, {rate})")));
        }
        let sampler = rand_distr::Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::InvalidHyper(format!("gamma({shape}, {rate}): {e}")))?;
        Ok(Self { shape, rate, sampler })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return match self.shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Equal) => self.rate.ln(),
                Some(std::cmp::Ordering::Greater) => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            };
        }
        self.shape * self.rate.ln() + (self.shape - 1.0) * x.ln() - self.rate * x - ln_gamma(self.shape)
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self.sampler.sample(rng)
    }
}

impl Density for Gamma {
    fn dim(&self) -> usize {
        1
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.ln_pdf(theta[0])
    }

    fn support(&self) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY)]
    }

    fn mean(&self) -> Option<Vec<f64>> {
        Some(vec![self.shape / self.rate])
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        Some(vec![self.shape.sqrt() / self.rate])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        Ok(vec![self.draw(rng)])
    }
}

/// `Uniform(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    lower: f64,
    upper: f64,
}

impl Uniform {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidArgument(format!("uniform needs lower < upper (got {lower}, {upper})")));
        }
        Ok(Self { lower, upper })
    }
}

impl Density for Uniform {
    fn dim(&self) -> usize {
        1
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        if theta[0] < self.lower || theta[0] > self.upper {
            f64::NEG_INFINITY
        } else {
            -(self.upper - self.lower).ln()
        }
    }

    fn support(&self) -> Vec<(f64, f64)> {
        vec![(self.lower, self.upper)]
    }

    fn mean(&self) -> Option<Vec<f64>> {
        Some(vec![0.5 * (self.lower + self.upper)])
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        Some(vec![(self.upper - self.lower) / 12f64.sqrt()])
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let u: f64 = rand_distr::StandardUniform.sample(rng);
        Ok(vec![self.lower + u * (self.upper - self.lower)])
    }
}

/// Multivariate normal with a dense covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MvNormal {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
    // Lower Cholesky factor of `cov`.
    chol: Vec<Vec<f64>>,
    log_det: f64,
}

impl MvNormal {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.len() != n || cov.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("covariance must be square and match the mean".into()));
        }
        let mut chol = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| chol[i][k] * chol[j][k]).sum();
                if i == j {
                    let d = cov[i][i] - s;
                    if !(d > 0.0) {
                        return Err(Error::InvalidArgument("covariance is not positive definite".into()));
                    }
                    chol[i][j] = d.sqrt();
                } else {
                    chol[i][j] = (cov[i][j] - s) / chol[j][j];
                }
            }
        }
        let log_det = 2.0 * (0..n).map(|i| chol[i][i].ln()).sum::<f64>();
        Ok(Self { mean, cov, chol, log_det })
    }

    /// Bivariate normal with unit variances and correlation `rho`.
    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::new(vec![0.0, 0.0], vec![vec![1.0, rho], vec![rho, 1.0]])
    }
}

impl Density for MvNormal {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        let n = self.mean.len();
        // Forward substitution L z = θ − μ.
        let mut z = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.chol[i][k] * z[k]).sum();
            z[i] = (theta[i] - self.mean[i] - s) / self.chol[i][i];
        }
        let q: f64 = z.iter().map(|v| v * v).sum();
        -0.5 * (q + self.log_det + n as f64 * LN_2PI)
    }

    fn mean(&self) -> Option<Vec<f64>> {
        Some(self.mean.clone())
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        Some((0..self.mean.len()).map(|i| self.cov[i][i].sqrt()).collect())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let n = self.mean.len();
        let z: Vec<f64> = (0..n).map(|_| rand_distr::StandardNormal.sample(&mut *rng)).collect();
        Ok((0..n)
            .map(|i| self.mean[i] + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect())
    }
}

/// Product of independent univariate densities.
#[derive(Clone)]
pub struct Independent {
    marginals: Vec<Arc<dyn Density>>,
}

impl Independent {
    pub fn new(marginals: Vec<Arc<dyn Density>>) -> Result<Self> {
        if marginals.is_empty() || marginals.iter().any(|m| m.dim() != 1) {
            return Err(Error::InvalidArgument("independent product needs univariate marginals".into()));
        }
        Ok(Self { marginals })
    }

    /// `p` independent standard normal coordinates.
    pub fn standard_normal(p: usize) -> Result<Self> {
        let std: Arc<dyn Density> = Arc::new(Normal::new(0.0, 1.0)?);
        Self::new(vec![std; p])
    }
}

impl Density for Independent {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.marginals.iter().zip(theta).map(|(m, x)| m.log_pdf(&[*x])).sum()
    }

    fn support(&self) -> Vec<(f64, f64)> {
        self.marginals.iter().map(|m| m.support()[0]).collect()
    }

    fn mean(&self) -> Option<Vec<f64>> {
        self.marginals.iter().map(|m| m.mean().map(|v| v[0])).collect()
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        self.marginals.iter().map(|m| m.std_dev().map(|v| v[0])).collect()
    }

    fn is_normalized(&self) -> bool {
        self.marginals.iter().all(|m| m.is_normalized())
    }

    fn effective_bounds(&self) -> Result<Vec<(f64, f64)>> {
        self.marginals.iter().map(|m| Ok(m.effective_bounds()?[0])).collect()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.marginals.iter().map(|m| Ok(m.sample(rng)?[0])).collect()
    }
}

/// Overrides the effective box of another density.
#[derive(Clone)]
pub struct WithBounds {
    inner: Arc<dyn Density>,
    bounds: Vec<(f64, f64)>,
}

impl WithBounds {
    pub fn new(inner: Arc<dyn Density>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.len() != inner.dim() || bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidArgument("bounds must be finite lower < upper, one per coordinate".into()));
        }
        Ok(Self { inner, bounds })
    }
}

impl Density for WithBounds {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn log_pdf(&self, theta: &[f64]) -> f64 {
        self.inner.log_pdf(theta)
    }

    fn support(&self) -> Vec<(f64, f64)> {
        self.inner.support()
    }

    fn mean(&self) -> Option<Vec<f64>> {
        self.inner.mean()
    }

    fn std_dev(&self) -> Option<Vec<f64>> {
        self.inner.std_dev()
    }

    fn is_normalized(&self) -> bool {
        self.inner.is_normalized()
    }

    fn effective_bounds(&self) -> Result<Vec<(f64, f64)>> {
        Ok(self.bounds.clone())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        self.inner.sample(rng)
    }
}

/// Log-density of Student's t with `nu` degrees of freedom at `z` (unit scale).
pub fn student_t_ln_pdf(z: f64, nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (1.0 + z * z / nu).ln()
}
