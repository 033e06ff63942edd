//! Worked models with closed-form answers: the Normal mean with known
//! variance, the Poisson rate with a Gamma prior, and a Poisson regression
//! used for the robustness workflow.

use std::path::Path;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::Distribution;
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::classes::{
    tilt_from_suffstat, ConjugateHyper, ExpFamSpec, ExpFamily, PriorClass, SuffStatModel, TiltFn, TiltProvenance,
};
use crate::density::{student_t_ln_pdf, Density, Gamma, Independent, Normal};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, DataVector, SuffStat};
use crate::samplers::RngSeed;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and > 0 (got {v})")))
    }
}

fn mean_of(x: &DataVector) -> SuffStat {
    SuffStat::scalar(x.values().iter().sum::<f64>() / x.len() as f64)
}

/// Normal likelihood for the mean `μ` with known variance, written through `x̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMeanFamily {
    pub n: f64,
    pub sigma2: f64,
}

impl ExpFamily for NormalMeanFamily {
    fn param_dim(&self) -> usize {
        1
    }

    fn stat_dim(&self) -> usize {
        1
    }

    fn log_a(&self, theta: &[f64]) -> f64 {
        -self.n * theta[0] * theta[0] / (2.0 * self.sigma2)
    }

    fn log_b0(&self, s: &[f64]) -> f64 {
        -self.n * s[0] * s[0] / (2.0 * self.sigma2)
    }

    fn dlog_b0_ds(&self, s: &[f64]) -> Vec<f64> {
        vec![-self.n * s[0] / self.sigma2]
    }

    fn natural_param(&self, theta: &[f64]) -> Vec<f64> {
        vec![self.n * theta[0] / self.sigma2]
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        mean_of(x)
    }

    /// `N(l/k, σ²/(n k))`.
    fn conjugate_prior(&self, hyper: &ConjugateHyper) -> Result<Arc<dyn Density>> {
        if !(hyper.k.is_finite() && hyper.k > 0.0) || hyper.l.len() != 1 || !hyper.l[0].is_finite() {
            return Err(Error::InvalidHyper(format!("normal conjugate prior needs k > 0 (got {hyper:?})")));
        }
        Ok(Arc::new(Normal::from_variance(hyper.l[0] / hyper.k, self.sigma2 / (self.n * hyper.k))?))
    }

    fn reference_param(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// Sampling density of `x̄` under i.i.d. `N(μ, σ²)` data: `N(μ, σ²/n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalMeanStat {
    pub n: f64,
    pub sigma2: f64,
    pub reference: f64,
}

impl SuffStatModel for NormalMeanStat {
    fn param_dim(&self) -> usize {
        1
    }

    fn stat_dim(&self) -> usize {
        1
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        mean_of(x)
    }

    fn log_g(&self, s: &[f64], theta: &[f64]) -> f64 {
        let var = self.sigma2 / self.n;
        -(theta[0] - s[0]).powi(2) / (2.0 * var) - 0.5 * (LN_2PI + var.ln())
    }

    fn dlogg_ds(&self, s: &[f64], theta: &[f64]) -> Vec<f64> {
        vec![self.n * (theta[0] - s[0]) / self.sigma2]
    }

    fn reference_param(&self) -> Vec<f64> {
        vec![self.reference]
    }
}

/// Closed-form conjugate posterior of the Normal model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct NormalTruth {
    pub mean: f64,
    pub variance: f64,
    /// Weight on the prior mean, `s'²/s²`.
    pub w1: f64,
    /// Weight on the data mean, `n s'²/σ²`.
    pub w2: f64,
}

/// `X_1..X_n ~ N(μ, σ²)` with prior `μ ~ N(m, s²)` and observed mean `x̄⁰`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormalKnownVar {
    pub n: f64,
    pub sigma2: f64,
    pub m: f64,
    pub s2: f64,
    pub xbar0: f64,
}

impl NormalKnownVar {
    pub fn new(n: f64, sigma2: f64, m: f64, s2: f64, xbar0: f64) -> Result<Self> {
        positive("n", n)?;
        positive("sigma2", sigma2)?;
        positive("s2", s2)?;
        if !(m.is_finite() && xbar0.is_finite()) {
            return Err(Error::InvalidArgument("m and xbar0 must be finite".into()));
        }
        Ok(Self { n, sigma2, m, s2, xbar0 })
    }

    /// `n = 100`, `σ² = 2`, `m = 10`, `s² = σ²/n`, `x̄⁰ = 9.975`.
    pub fn replication() -> Self {
        Self { n: 100.0, sigma2: 2.0, m: 10.0, s2: 0.02, xbar0: 9.975 }
    }

    /// The observed data, summarized by its mean.
    pub fn x0(&self) -> DataVector {
        DataVector::from_vec_unchecked(vec![self.xbar0])
    }

    pub fn truth(&self) -> NormalTruth {
        let variance = 1.0 / (1.0 / self.s2 + self.n / self.sigma2);
        let w1 = variance / self.s2;
        let w2 = self.n * variance / self.sigma2;
        NormalTruth { mean: w1 * self.m + w2 * self.xbar0, variance, w1, w2 }
    }

    /// Posterior after observing the shifted mean `x̄⁰ + t`.
    pub fn shifted_truth(&self, t: f64) -> NormalTruth {
        Self { xbar0: self.xbar0 + t, ..*self }.truth()
    }

    pub fn family(&self) -> Arc<NormalMeanFamily> {
        Arc::new(NormalMeanFamily { n: self.n, sigma2: self.sigma2 })
    }

    /// Conjugate hyperparameters of `N(m, s²)`: `k = σ²/(n s²)`, `l = k m`.
    pub fn hyper(&self) -> ConjugateHyper {
        let k = self.sigma2 / (self.n * self.s2);
        ConjugateHyper { k, l: vec![k * self.m] }
    }

    pub fn expfam(&self) -> Result<ExpFamSpec> {
        ExpFamSpec::new(self.family(), self.hyper())
    }

    pub fn suffstat_model(&self) -> Arc<dyn SuffStatModel> {
        Arc::new(NormalMeanStat { n: self.n, sigma2: self.sigma2, reference: self.m })
    }

    pub fn prior(&self) -> Result<Normal> {
        Normal::from_variance(self.m, self.s2)
    }

    /// Mean shift of a conjugate member per unit `t`: `w₂/w₁ = n s²/σ²`.
    pub fn member_shift_per_unit(&self) -> f64 {
        let tr = self.truth();
        tr.w2 / tr.w1
    }

    /// Γ_ε built from the derivative of `log g` at `x̄⁰`.
    pub fn abc_class(&self, eps: f64) -> Result<PriorClass> {
        let base: Arc<dyn Density> = Arc::new(self.prior()?);
        let tilt = tilt_from_suffstat(self.suffstat_model(), &self.x0())?;
        PriorClass::abc(base, tilt, vec![eps])
    }

    /// Γ_ε^E: `{N(m + (w₂/w₁)t, s²) : |t| ≤ ε}`.
    pub fn normal_class_e(&self, eps: f64) -> Result<PriorClass> {
        PriorClass::abc_e(&self.expfam()?, vec![eps])
    }

    /// Draws `x̄' ~ N(μ, σ²/n)`.
    pub fn simulate_mean(&self, theta: &[f64], rng: &mut dyn RngCore) -> DataVector {
        let z: f64 = rand_distr::StandardNormal.sample(rng);
        DataVector::from_vec_unchecked(vec![theta[0] + (self.sigma2 / self.n).sqrt() * z])
    }
}

/// Poisson likelihood for the rate `λ`, written through `S = Σ x_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonRateFamily {
    pub n: f64,
}

impl ExpFamily for PoissonRateFamily {
    fn param_dim(&self) -> usize {
        1
    }

    fn stat_dim(&self) -> usize {
        1
    }

    fn log_a(&self, theta: &[f64]) -> f64 {
        -self.n * theta[0]
    }

    fn log_b0(&self, s: &[f64]) -> f64 {
        s[0] * self.n.ln() - ln_gamma(s[0] + 1.0)
    }

    fn dlog_b0_ds(&self, s: &[f64]) -> Vec<f64> {
        vec![self.n.ln() - digamma(s[0] + 1.0)]
    }

    fn natural_param(&self, theta: &[f64]) -> Vec<f64> {
        vec![theta[0].ln()]
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        SuffStat::scalar(x.values().iter().sum())
    }

    /// `Gamma(l + 1, n k)`.
    fn conjugate_prior(&self, hyper: &ConjugateHyper) -> Result<Arc<dyn Density>> {
        if hyper.l.len() != 1 {
            return Err(Error::InvalidHyper("poisson conjugate prior has a scalar l".into()));
        }
        Ok(Arc::new(Gamma::new(hyper.l[0] + 1.0, self.n * hyper.k)?))
    }

    fn reference_param(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// `S ~ Poisson(nλ)`, treated as a density in the real-valued statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSumStat {
    pub n: f64,
}

impl SuffStatModel for PoissonSumStat {
    fn param_dim(&self) -> usize {
        1
    }

    fn stat_dim(&self) -> usize {
        1
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        SuffStat::scalar(x.values().iter().sum())
    }

    fn log_g(&self, s: &[f64], theta: &[f64]) -> f64 {
        let rate = self.n * theta[0];
        -rate + s[0] * rate.ln() - ln_gamma(s[0] + 1.0)
    }

    fn dlogg_ds(&self, s: &[f64], theta: &[f64]) -> Vec<f64> {
        vec![(self.n * theta[0]).ln() - digamma(s[0] + 1.0)]
    }

    fn reference_param(&self) -> Vec<f64> {
        vec![1.0]
    }
}

/// `X_1..X_n ~ Poisson(λ)` with prior `λ ~ Gamma(r, v)` (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PoissonGamma {
    pub n: usize,
    pub r: f64,
    pub v: f64,
    pub sum_x0: f64,
}

impl PoissonGamma {
    pub fn new(n: usize, r: f64, v: f64, sum_x0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        positive("r", r)?;
        positive("v", v)?;
        if !(sum_x0.is_finite() && sum_x0 >= 0.0) {
            return Err(Error::InvalidArgument("sum_x0 must be finite and >= 0".into()));
        }
        Ok(Self { n, r, v, sum_x0 })
    }

    pub fn x0(&self) -> DataVector {
        DataVector::from_vec_unchecked(vec![self.sum_x0])
    }

    pub fn family(&self) -> Arc<PoissonRateFamily> {
        Arc::new(PoissonRateFamily { n: self.n as f64 })
    }

    /// `k = v/n`, `l = r − 1`.
    pub fn hyper(&self) -> ConjugateHyper {
        ConjugateHyper { k: self.v / self.n as f64, l: vec![self.r - 1.0] }
    }

    pub fn expfam(&self) -> Result<ExpFamSpec> {
        ExpFamSpec::new(self.family(), self.hyper())
    }

    pub fn suffstat_model(&self) -> Arc<dyn SuffStatModel> {
        Arc::new(PoissonSumStat { n: self.n as f64 })
    }

    pub fn prior(&self) -> Result<Gamma> {
        Gamma::new(self.r, self.v)
    }

    /// Posterior `Gamma(r + t + Σx⁰, v + n)` under the member at shift `t`.
    pub fn posterior(&self, t: f64) -> Result<Gamma> {
        Gamma::new(self.r + t + self.sum_x0, self.v + self.n as f64)
    }

    pub fn abc_class(&self, eps: f64) -> Result<PriorClass> {
        let base: Arc<dyn Density> = Arc::new(self.prior()?);
        let tilt = tilt_from_suffstat(self.suffstat_model(), &self.x0())?;
        PriorClass::abc(base, tilt, vec![eps])
    }

    /// Γ_ε^E: `{Gamma(r + t, v) : |t| ≤ ε}`; needs `r − ε > 0`.
    pub fn poisson_class_e(&self, eps: f64) -> Result<PriorClass> {
        if self.r - eps <= 0.0 {
            return Err(Error::InvalidHyper(format!(
                "shape must stay positive: r − ε = {} ≤ 0",
                self.r - eps
            )));
        }
        PriorClass::abc_e(&self.expfam()?, vec![eps])
    }

    /// Draws `Σ x'_i ~ Poisson(nλ)`.
    pub fn simulate_sum(&self, theta: &[f64], rng: &mut dyn RngCore) -> Result<DataVector> {
        let rate = self.n as f64 * theta[0];
        if rate <= 0.0 {
            return Ok(DataVector::from_vec_unchecked(vec![0.0]));
        }
        let pois = rand_distr::Poisson::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(DataVector::from_vec_unchecked(vec![pois.sample(rng)]))
    }
}

/// One observation `x ~ t_ν(θ, 1)`; the statistic is `x` itself. Not an
/// exponential family, so its derivative tilt is only a first-order match.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTLocation {
    pub nu: f64,
}

impl SuffStatModel for StudentTLocation {
    fn param_dim(&self) -> usize {
        1
    }

    fn stat_dim(&self) -> usize {
        1
    }

    fn suff_stat(&self, x: &DataVector) -> SuffStat {
        SuffStat::scalar(x.values()[0])
    }

    fn log_g(&self, s: &[f64], theta: &[f64]) -> f64 {
        student_t_ln_pdf(s[0] - theta[0], self.nu)
    }

    fn dlogg_ds(&self, s: &[f64], theta: &[f64]) -> Vec<f64> {
        let z = s[0] - theta[0];
        vec![-(self.nu + 1.0) * z / (self.nu + z * z)]
    }

    fn reference_param(&self) -> Vec<f64> {
        vec![0.0]
    }
}

/// `y_i ~ Poisson(exp(β'X_i))` with a prior on `β` and per-observation bounds `ε_i`.
#[derive(Clone)]
pub struct PoissonRegression {
    design: Vec<Vec<f64>>,
    counts: Vec<f64>,
    prior: Arc<dyn Density>,
    epsilon: Vec<f64>,
}

impl std::fmt::Debug for PoissonRegression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonRegression")
            .field("n_obs", &self.counts.len())
            .field("p", &self.p())
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

/// Coefficients used to generate the bundled dataset.
pub const SYNTHETIC_BETA: [f64; 2] = [0.5, -0.25];
pub const SYNTHETIC_N: usize = 20;
pub const SYNTHETIC_SEED: u64 = 20_240_601;

const BUNDLED_CSV: &str = include_str!("../data/poisson_regression.csv");

/// Range of posterior means over sampled members of the class.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RobustnessRange {
    /// Posterior mean under the base prior.
    pub base_mean: Vec<f64>,
    pub min_mean: Vec<f64>,
    pub max_mean: Vec<f64>,
    pub members: usize,
    pub particles: usize,
    /// Smallest effective sample size across members.
    pub min_ess: f64,
}

impl RobustnessRange {
    pub fn widths(&self) -> Vec<f64> {
        self.max_mean.iter().zip(&self.min_mean).map(|(a, b)| a - b).collect()
    }
}

impl PoissonRegression {
    pub fn new(design: Vec<Vec<f64>>, counts: Vec<f64>, prior: Arc<dyn Density>, epsilon: Vec<f64>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || design.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: design.len() });
        }
        let p = design[0].len();
        if p == 0 || design.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidArgument("design rows must share a nonzero length".into()));
        }
        if prior.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: prior.dim() });
        }
        if epsilon.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: epsilon.len() });
        }
        if counts.iter().any(|y| !(y.is_finite() && *y >= 0.0 && y.fract() == 0.0)) {
            return Err(Error::InvalidArgument("counts must be nonnegative integers".into()));
        }
        if epsilon.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::InvalidArgument("epsilon entries must be finite and > 0".into()));
        }
        Ok(Self { design, counts, prior, epsilon })
    }

    /// Intercept plus an equispaced covariate on `[−1, 1]`, counts drawn with `seed`.
    pub fn generate(n: usize, beta: &[f64; 2], seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two observations".into()));
        }
        let mut rng = RngSeed::new(seed, 0).rng(0);
        let mut design = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for i in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let rate = (beta[0] + beta[1] * x).exp();
            let pois = rand_distr::Poisson::new(rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            design.push(vec![1.0, x]);
            counts.push(pois.sample(&mut rng));
        }
        Ok((design, counts))
    }

    /// The bundled synthetic dataset with independent standard normal priors.
    pub fn bundled(epsilon: f64) -> Result<Self> {
        let (design, counts) = parse_csv(BUNDLED_CSV.as_bytes())?;
        let p = design[0].len();
        let n = counts.len();
        Self::new(design, counts, Arc::new(Independent::standard_normal(p)?), vec![epsilon; n])
    }

    pub fn from_csv(path: &Path, prior: Arc<dyn Density>, epsilon: f64) -> Result<Self> {
        let (design, counts) = load_csv(path)?;
        let n = counts.len();
        Self::new(design, counts, prior, vec![epsilon; n])
    }

    pub fn with_epsilon(&self, epsilon: Vec<f64>) -> Result<Self> {
        Self::new(self.design.clone(), self.counts.clone(), Arc::clone(&self.prior), epsilon)
    }

    pub fn design(&self) -> &[Vec<f64>] {
        &self.design
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn prior(&self) -> &Arc<dyn Density> {
        &self.prior
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn p(&self) -> usize {
        self.design.first().map_or(0, Vec::len)
    }

    /// `Σ_i y_i β'X_i − exp(β'X_i) − log y_i!`.
    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        self.design
            .iter()
            .zip(&self.counts)
            .map(|(x, y)| {
                let eta: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
                y * eta - eta.exp() - ln_gamma(y + 1.0)
            })
            .sum()
    }

    /// Tilt `h_i(β) = β'X_i`, one coordinate per observation.
    pub fn tilt(&self) -> TiltFn {
        let design = self.design.clone();
        TiltFn::new(design.len(), TiltProvenance::LikelihoodGeneral, move |beta| {
            design.iter().map(|x| x.iter().zip(beta).map(|(a, b)| a * b).sum()).collect()
        })
    }

    /// Scalar tilt `h_i(β) = β'X_i` of each observation on its own.
    pub fn observation_tilts(&self) -> Vec<TiltFn> {
        self.design
            .iter()
            .map(|x| {
                let x = x.clone();
                TiltFn::scalar(TiltProvenance::LikelihoodGeneral, move |beta| {
                    x.iter().zip(beta).map(|(a, b)| a * b).sum()
                })
            })
            .collect()
    }

    /// `{π(β) exp(Σ_i β'X_i t_i)/E_π[·] : |t_i| ≤ ε_i}`.
    pub fn class(&self) -> Result<PriorClass> {
        PriorClass::abc(Arc::clone(&self.prior), self.tilt(), self.epsilon.clone())
    }

    /// Posterior means of `β` over `members` random members `t = u ∘ ε`,
    /// `u ~ U(−1, 1)^N`, all reweighting one shared prior sample.
    pub fn robustness_range(&self, members: usize, particles: usize, seed: RngSeed) -> Result<RobustnessRange> {
        if members == 0 || particles == 0 {
            return Err(Error::InvalidArgument("members and particles must be at least 1".into()));
        }
        let prior_draws = crate::samplers::draw_from(self.prior.as_ref(), particles, seed)?;
        let tilt = self.tilt();
        let hs: Vec<Vec<f64>> = prior_draws.par_iter().map(|b| tilt.eval(b)).collect();
        let loglik: Vec<f64> = prior_draws.par_iter().map(|b| self.log_likelihood(b)).collect();

        let p = self.p();
        let n = self.counts.len();
        let mut t_rng = seed.substream(1).rng(0);
        let mut ts = vec![vec![0.0; n]];
        for _ in 0..members {
            ts.push(
                self.epsilon
                    .iter()
                    .map(|e| e * (2.0 * rand::Rng::random::<f64>(&mut t_rng) - 1.0))
                    .collect(),
            );
        }
        let results: Vec<(Vec<f64>, f64)> = ts
            .par_iter()
            .map(|t| {
                let lw: Vec<f64> = hs
                    .iter()
                    .zip(&loglik)
                    .map(|(h, ll)| h.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() + ll)
                    .collect();
                let lse = log_sum_exp(&lw)?;
                let w: Vec<f64> = lw.iter().map(|v| (v - lse).exp()).collect();
                let ess = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
                let mean = (0..p)
                    .map(|k| prior_draws.iter().zip(&w).map(|(b, wi)| wi * b[k]).sum())
                    .collect();
                Ok((mean, ess))
            })
            .collect::<Result<_>>()?;

        let base_mean = results[0].0.clone();
        let mut min_mean = base_mean.clone();
        let mut max_mean = base_mean.clone();
        let mut min_ess = results[0].1;
        for (mean, ess) in &results[1..] {
            for k in 0..p {
                min_mean[k] = min_mean[k].min(mean[k]);
                max_mean[k] = max_mean[k].max(mean[k]);
            }
            min_ess = min_ess.min(*ess);
        }
        Ok(RobustnessRange { base_mean, min_mean, max_mean, members, particles, min_ess })
    }
}

/// Reads a design and counts from a CSV file with columns `x1..xp, y`.
pub fn load_csv(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_csv(file)
}

fn parse_csv(reader: impl std::io::Read) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| Error::Data("missing column `y`".into()))?;
    let mut design = Vec::new();
    let mut counts = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        let mut x = Vec::with_capacity(record.len() - 1);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("row {}, column {}: {e}", row + 1, col + 1)))?;
            if col == y_col {
                counts.push(v);
            } else {
                x.push(v);
            }
        }
        design.push(x);
    }
    if counts.is_empty() {
        return Err(Error::Data("no rows".into()));
    }
    Ok((design, counts))
}

/// Writes a design and counts as CSV with columns `x1..xp, y`.
pub fn write_csv(writer: impl std::io::Write, design: &[Vec<f64>], counts: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let p = design.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for (x, y) in design.iter().zip(counts) {
        let mut row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        row.push(format!("{}", *y as u64));
        w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}
