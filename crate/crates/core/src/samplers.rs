//! Importance samplers for tilted priors and their posteriors, a rejection
//! ABC baseline, systematic resampling and the two-sample KS test.
//!
//! Randomness is drawn from ChaCha8 streams keyed by `(seed, stream_id, chunk)`.
//! Work is split into fixed-size chunks and collected in chunk order, so output
//! does not depend on the number of threads.

use rand::{Rng, SeedableRng};
pub use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{ExpFamSpec, PriorClass, SuffStatModel, TiltedPrior};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, DataVector, ParamPoint, SuffStat, WeightedSample};

/// Particles per random-number chunk.
pub const CHUNK: usize = 1024;

/// Chunks processed per round of rejection ABC before checking the stop rule.
const ABC_ROUND_CHUNKS: u64 = 64;

/// Minimum sample size accepted by [`ks_two_sample`].
pub const KS_MIN_SIZE: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u32,
}

impl RngSeed {
    pub fn new(seed: u64, stream_id: u32) -> Self {
        Self { seed, stream_id }
    }

    /// Generator for one chunk of work.
    pub fn rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.stream_id) << 32) | (chunk & 0xffff_ffff));
        rng
    }

    /// An independent stream for a sub-task.
    pub fn substream(&self, k: u32) -> Self {
        Self { seed: self.seed, stream_id: self.stream_id.wrapping_add(k.wrapping_mul(0x1_0000)) }
    }
}

/// Runs `f` on consecutive chunks of `n` items in parallel; results keep item order.
fn chunked<T, F>(n: usize, seed: RngSeed, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed.rng(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| f(&mut rng, c)).collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// `n` independent draws from `density`.
pub fn draw_from(density: &dyn Density, n: usize, seed: RngSeed) -> Result<Vec<Vec<f64>>> {
    chunked(n, seed, |rng, _| density.sample(rng))
}

/// A weighted sample with its effective sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceOutput {
    pub sample: WeightedSample,
    pub ess: f64,
    /// Set when `ess < N/100`.
    pub degenerate: bool,
}

impl ImportanceOutput {
    fn from_log_weights(points: Vec<Vec<f64>>, log_weights: Vec<f64>, seed: RngSeed) -> Result<Self> {
        let points = points.into_iter().map(ParamPoint::new).collect::<Result<Vec<_>>>()?;
        let n = points.len();
        let sample = WeightedSample::new(points, log_weights, seed.seed)?.normalize()?;
        let ess = sample.ess()?;
        Ok(Self { sample, ess, degenerate: ess < n as f64 / 100.0 })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidArgument("particle count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Draws from `π'(·, t)`: `θ_i ~ π`, `ω_i ∝ exp(sign·h(θ_i)·t)`.
pub fn sample_prior_member(member: &TiltedPrior, n: usize, seed: RngSeed) -> Result<ImportanceOutput> {
    importance_posterior(member, &|_| 0.0, n, seed)
}

/// Draws `θ_i ~ π` and weights by `exp(sign·h(θ_i)·t + loglik(θ_i))`.
pub fn importance_posterior(
    member: &TiltedPrior,
    loglik: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    seed: RngSeed,
) -> Result<ImportanceOutput> {
    check_n(n)?;
    let base = member.base();
    let drawn: Vec<(Vec<f64>, f64)> = chunked(n, seed, |rng, _| {
        let theta = base.sample(rng)?;
        let lw = member.log_weight(&theta) + loglik(&theta);
        Ok((theta, lw))
    })?;
    let (points, log_weights) = drawn.into_iter().unzip();
    ImportanceOutput::from_log_weights(points, log_weights, seed)
}

/// Targets `π(θ|x')` with `s(x') = s(x⁰) + t` using only `g(s(x⁰)|θ)`: no data are simulated.
pub fn sample_posterior_xprime(
    class: &PriorClass,
    model: &dyn SuffStatModel,
    x0: &DataVector,
    t: &[f64],
    n: usize,
    seed: RngSeed,
) -> Result<ImportanceOutput> {
    let member = class.make_member(t)?;
    let s0 = model.suff_stat(x0);
    importance_posterior(&member, &|theta| model.log_g(s0.values(), theta), n, seed)
}

/// How the per-`t` weighted samples are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Each slice carries its estimated evidence `m(s(x⁰) + t_i)`, so the pool
    /// targets `π(θ) ∫ g(s(x⁰) + t|θ) dt`, the rejection ABC posterior.
    #[default]
    Evidence,
    /// Slices normalized separately and pooled with equal mass.
    Uniform,
}

/// Tilt magnitudes `t_i ~ U(−ε, ε)` component-wise, one per slice.
fn slice_ts(eps: &[f64], n_t: usize, seed: RngSeed) -> Vec<Vec<f64>> {
    let mut rng = seed.rng(0);
    (0..n_t)
        .map(|_| eps.iter().map(|e| e * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect()
}

fn pool_slices(
    slices: Vec<(Vec<Vec<f64>>, Vec<f64>, f64)>,
    pooling: Pooling,
    seed: RngSeed,
) -> Result<ImportanceOutput> {
    let mut points = Vec::new();
    let mut log_weights = Vec::new();
    for (pts, lw, log_evidence) in slices {
        let within = log_sum_exp(&lw)?;
        let slice_mass = match pooling {
            Pooling::Evidence => log_evidence,
            Pooling::Uniform => 0.0,
        };
        log_weights.extend(lw.iter().map(|v| v - within + slice_mass));
        points.extend(pts);
    }
    ImportanceOutput::from_log_weights(points, log_weights, seed)
}

fn check_eps(class: &PriorClass) -> Result<Vec<f64>> {
    class
        .epsilon()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| Error::InvalidArgument("class has no epsilon to draw t from".into()))
}

/// Targets the ABC posterior for `x⁰`: draws `N_t` values `t_i ~ U(−ε, ε)`,
/// runs the `x'` sampler with `m` particles for each and pools the slices.
pub fn sample_posterior_x0(
    class: &PriorClass,
    model: &dyn SuffStatModel,
    x0: &DataVector,
    n_t: usize,
    m: usize,
    pooling: Pooling,
    seed: RngSeed,
) -> Result<ImportanceOutput> {
    check_n(n_t)?;
    check_n(m)?;
    let eps = check_eps(class)?;
    let s0 = model.suff_stat(x0);
    let ts = slice_ts(&eps, n_t, seed.substream(1));
    let particles = seed.substream(2);
    let slices = ts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let member = class.make_member(t)?;
            let shifted = s0.shifted(t)?;
            let mut rng = particles.rng(i as u64);
            let mut pts = Vec::with_capacity(m);
            let mut lw = Vec::with_capacity(m);
            let mut lg_shifted = Vec::with_capacity(m);
            for _ in 0..m {
                let theta = member.base().sample(&mut rng)?;
                lw.push(member.log_weight(&theta) + model.log_g(s0.values(), &theta));
                lg_shifted.push(model.log_g(shifted.values(), &theta));
                pts.push(theta);
            }
            let log_evidence = log_sum_exp(&lg_shifted)? - (m as f64).ln();
            Ok((pts, lw, log_evidence))
        })
        .collect::<Result<Vec<_>>>()?;
    pool_slices(slices, pooling, seed)
}

/// Conjugate counterpart of [`sample_posterior_x0`]: each slice draws directly
/// from the posterior of the shifted prior `γ' = (k, l + t_i)`.
pub fn sample_posterior_x0_conjugate(
    spec: &ExpFamSpec,
    x0: &DataVector,
    eps: &[f64],
    n_t: usize,
    m: usize,
    pooling: Pooling,
    seed: RngSeed,
) -> Result<ImportanceOutput> {
    check_n(n_t)?;
    check_n(m)?;
    let s0: SuffStat = spec.family().suff_stat(x0);
    let ts = slice_ts(eps, n_t, seed.substream(1));
    let particles = seed.substream(2);
    let slices = ts
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let shifted = s0.shifted(t)?;
            let post = spec.posterior(shifted.values())?;
            let mut rng = particles.rng(i as u64);
            let pts = (0..m).map(|_| post.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
            let log_evidence = spec.log_prior_predictive(shifted.values())?;
            Ok((pts, vec![0.0; m], log_evidence))
        })
        .collect::<Result<Vec<_>>>()?;
    pool_slices(slices, pooling, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    /// Acceptances wanted.
    pub n: usize,
    pub epsilon: Vec<f64>,
    pub max_attempts: u64,
}

impl AbcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if self.epsilon.is_empty() || self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidArgument("epsilon entries must be > 0".into()));
        }
        if self.max_attempts < self.n as u64 {
            return Err(Error::InvalidArgument("max_attempts must be at least N".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcOutput {
    /// Accepted draws in draw-index order, equally weighted.
    pub sample: WeightedSample,
    /// Draws simulated, including those after the N-th acceptance in the last round.
    pub attempts: u64,
    /// Acceptances among `attempts`.
    pub accepted: u64,
    pub acceptance_rate: f64,
}

/// Simulator of a dataset given `θ`.
pub type Simulator<'a> = dyn Fn(&[f64], &mut dyn RngCore) -> Result<DataVector> + Sync + 'a;

/// Draws `θ' ~ π`, simulates `x'` and accepts when `|s_k(x') − s_k(x⁰)| ≤ ε_k` for all `k`.
pub fn rejection_abc(
    prior: &dyn Density,
    simulator: &Simulator<'_>,
    suff_stat: &(dyn Fn(&DataVector) -> SuffStat + Sync),
    x0: &DataVector,
    cfg: &AbcConfig,
    seed: RngSeed,
) -> Result<AbcOutput> {
    cfg.validate()?;
    let s0 = suff_stat(x0);
    if s0.dim() != cfg.epsilon.len() {
        return Err(Error::DimensionMismatch { expected: s0.dim(), got: cfg.epsilon.len() });
    }
    let total_chunks = cfg.max_attempts.div_ceil(CHUNK as u64);
    let mut accepted_points: Vec<Vec<f64>> = Vec::with_capacity(cfg.n);
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    let mut min_distance = f64::INFINITY;
    let mut next_chunk = 0u64;

    while next_chunk < total_chunks && accepted_points.len() < cfg.n {
        let end = (next_chunk + ABC_ROUND_CHUNKS).min(total_chunks);
        let round: Vec<(Vec<Vec<f64>>, u64, f64)> = (next_chunk..end)
            .into_par_iter()
            .map(|c| {
                let mut rng = seed.rng(c);
                let len = (cfg.max_attempts - c * CHUNK as u64).min(CHUNK as u64);
                let mut hits = Vec::new();
                let mut closest = f64::INFINITY;
                for _ in 0..len {
                    let theta = prior.sample(&mut rng)?;
                    let x = simulator(&theta, &mut rng)?;
                    let s = suff_stat(&x);
                    let mut inside = true;
                    let mut dist: f64 = 0.0;
                    for ((a, b), e) in s.values().iter().zip(s0.values()).zip(&cfg.epsilon) {
                        let d = (a - b).abs();
                        dist = dist.max(d);
                        inside &= d <= *e;
                    }
                    closest = closest.min(dist);
                    if inside {
                        hits.push(theta);
                    }
                }
                Ok((hits, len, closest))
            })
            .collect::<Result<_>>()?;
        for (hits, len, closest) in round {
            attempts += len;
            accepted += hits.len() as u64;
            min_distance = min_distance.min(closest);
            for theta in hits {
                if accepted_points.len() < cfg.n {
                    accepted_points.push(theta);
                }
            }
        }
        next_chunk = end;
    }

    if accepted_points.is_empty() {
        return Err(Error::NoAcceptances { attempts, min_distance });
    }
    let points = accepted_points.into_iter().map(ParamPoint::new).collect::<Result<Vec<_>>>()?;
    Ok(AbcOutput {
        sample: WeightedSample::uniform(points, seed.seed),
        attempts,
        accepted,
        acceptance_rate: accepted as f64 / attempts as f64,
    })
}

/// `M` equally weighted points by systematic resampling.
pub fn systematic_resample(sample: &WeightedSample, m: usize, seed: RngSeed) -> Result<WeightedSample> {
    if m < 1 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if !sample.normalized {
        return Err(Error::NotNormalized);
    }
    let w = sample.weights()?;
    let u0: f64 = seed.rng(0).random::<f64>() / m as f64;
    let step = 1.0 / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut cum = 0.0;
    let mut i = 0;
    for j in 0..m {
        let u = u0 + j as f64 * step;
        while i + 1 < w.len() && cum + w[i] <= u {
            cum += w[i];
            i += 1;
        }
        out.push(sample.points[i].clone());
    }
    Ok(WeightedSample::uniform(out, seed.seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_1pct: f64,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_1pct
    }
}

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic 1% critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    for len in [a.len(), b.len()] {
        if len < KS_MIN_SIZE {
            return Err(Error::SampleTooSmall { min: KS_MIN_SIZE, got: len });
        }
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, critical_1pct: 1.628 * ((na + nb) / (na * nb)).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Gamma, Normal};
    use crate::models::{NormalKnownVar, PoissonGamma};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::RngCore;

    fn normal_draws(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
        let d = Normal::new(mean, sd).unwrap();
        draw_from(&d, n, RngSeed::new(seed, 7)).unwrap().into_iter().map(|v| v[0]).collect()
    }

    #[test]
    fn chacha_streams_are_reproducible_and_distinct() {
        let s = RngSeed::new(42, 3);
        let a: Vec<u64> = (0..4).map(|_| s.rng(5).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(s.rng(5).next_u64(), s.rng(6).next_u64());
        assert_ne!(s.rng(5).next_u64(), s.substream(1).rng(5).next_u64());
    }

    #[test]
    fn zero_tilt_gives_equal_weights() {
        let class = NormalKnownVar::replication().abc_class(1.0).unwrap();
        let out = sample_prior_member(&class.make_member(&[0.0]).unwrap(), 5000, RngSeed::new(1, 0)).unwrap();
        for w in out.sample.weights().unwrap() {
            assert_abs_diff_eq!(w, 1.0 / 5000.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(out.ess, 5000.0, epsilon = 1e-6);
        assert!(!out.degenerate);
    }

    #[test]
    fn tilted_normal_member_mean() {
        let class = NormalKnownVar::replication().abc_class(1.0).unwrap();
        let out = sample_prior_member(&class.make_member(&[0.1]).unwrap(), 100_000, RngSeed::new(2, 0)).unwrap();
        let mean = out.sample.mean(0).unwrap();
        let se = out.sample.mean_standard_error(0).unwrap();
        assert!((mean - 10.1).abs() < 3.0 * se, "mean {mean} se {se}");
        let resampled = systematic_resample(&out.sample, out.ess as usize, RngSeed::new(2, 1)).unwrap();
        let ks = ks_two_sample(&resampled.coordinate(0), &normal_draws(10.1, 0.02f64.sqrt(), 100_000, 3)).unwrap();
        assert!(ks.passes(), "{ks:?}");
    }

    #[test]
    fn tilted_gamma_member_mean() {
        let class = PoissonGamma::new(10, 2.0, 1.0, 30.0).unwrap().abc_class(1.0).unwrap();
        let out = sample_prior_member(&class.make_member(&[1.0]).unwrap(), 100_000, RngSeed::new(4, 0)).unwrap();
        let mean = out.sample.mean(0).unwrap();
        let se = out.sample.mean_standard_error(0).unwrap();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn xprime_sampler_targets_shifted_posteriors() {
        let model = NormalKnownVar::replication();
        let class = model.abc_class(1.0).unwrap();
        let stat = model.suffstat_model();
        for (t, target) in [(0.0, 9.9875), (0.1, 10.0375)] {
            let out = sample_posterior_xprime(&class, stat.as_ref(), &model.x0(), &[t], 100_000, RngSeed::new(5, 0)).unwrap();
            let mean = out.sample.mean(0).unwrap();
            let se = out.sample.mean_standard_error(0).unwrap();
            assert!((mean - target).abs() < 3.0 * se, "t={t}: mean {mean} se {se}");
        }

        let pg = PoissonGamma::new(10, 2.0, 1.0, 30.0).unwrap();
        let class = pg.abc_class(1.0).unwrap();
        let out = sample_posterior_xprime(&class, pg.suffstat_model().as_ref(), &pg.x0(), &[1.0], 100_000, RngSeed::new(6, 0)).unwrap();
        let closed = pg.posterior(1.0).unwrap();
        let mean = out.sample.mean(0).unwrap();
        let se = out.sample.mean_standard_error(0).unwrap();
        assert!((mean - closed.mean().unwrap()[0]).abs() < 3.0 * se);
    }

    #[test]
    fn constant_rescaling_of_log_weights_is_invisible() {
        let class = NormalKnownVar::replication().abc_class(1.0).unwrap();
        let out = sample_prior_member(&class.make_member(&[0.3]).unwrap(), 2000, RngSeed::new(8, 0)).unwrap();
        let shifted = WeightedSample::new(
            out.sample.points.clone(),
            out.sample.log_weights.iter().map(|v| v + 123.4).collect(),
            0,
        )
        .unwrap()
        .normalize()
        .unwrap();
        assert_abs_diff_eq!(out.sample.mean(0).unwrap(), shifted.mean(0).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn uniform_pooling_equals_joint_normalization_of_slice_normalized_weights() {
        let model = NormalKnownVar::replication();
        let class = model.abc_class(0.5).unwrap();
        let stat = model.suffstat_model();
        let seed = RngSeed::new(9, 0);
        let pooled = sample_posterior_x0(&class, stat.as_ref(), &model.x0(), 20, 300, Pooling::Uniform, seed).unwrap();
        let ts = slice_ts(&[0.5], 20, seed.substream(1));
        let mut manual = 0.0;
        for (i, t) in ts.iter().enumerate() {
            let member = class.make_member(t).unwrap();
            let mut rng = seed.substream(2).rng(i as u64);
            let mut pts = Vec::new();
            let mut lw = Vec::new();
            for _ in 0..300 {
                let th = member.base().sample(&mut rng).unwrap();
                lw.push(member.log_weight(&th) + stat.log_g(&[model.xbar0], &th));
                pts.push(th[0]);
            }
            let lse = log_sum_exp(&lw).unwrap();
            manual += pts.iter().zip(&lw).map(|(p, l)| p * (l - lse).exp()).sum::<f64>() / 20.0;
        }
        assert_abs_diff_eq!(pooled.sample.mean(0).unwrap(), manual, epsilon = 1e-12);
    }

    #[test]
    fn pooled_and_conjugate_routes_agree() {
        let model = NormalKnownVar::replication();
        let class = model.abc_class(1.0).unwrap();
        let is = sample_posterior_x0(&class, model.suffstat_model().as_ref(), &model.x0(), 4000, 50, Pooling::Evidence, RngSeed::new(10, 0)).unwrap();
        let direct = sample_posterior_x0_conjugate(&model.expfam().unwrap(), &model.x0(), &[1.0], 4000, 50, Pooling::Evidence, RngSeed::new(11, 0)).unwrap();
        // Draws within a slice are correlated through t, so compare far fewer points than slices.
        let a = systematic_resample(&is.sample, 1000, RngSeed::new(12, 0)).unwrap();
        let b = systematic_resample(&direct.sample, 1000, RngSeed::new(13, 0)).unwrap();
        let ks = ks_two_sample(&a.coordinate(0), &b.coordinate(0)).unwrap();
        assert!(ks.passes(), "{ks:?}");
    }

    #[test]
    fn output_is_independent_of_thread_count() {
        let model = NormalKnownVar::replication();
        let class = model.abc_class(1.0).unwrap();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let a = sample_posterior_x0(&class, model.suffstat_model().as_ref(), &model.x0(), 50, 100, Pooling::Evidence, RngSeed::new(3, 0)).unwrap();
                let b = sample_prior_member(&class.make_member(&[0.2]).unwrap(), 5000, RngSeed::new(3, 1)).unwrap();
                (a, b)
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejection_abc_accept_all_reproduces_prior() {
        let model = NormalKnownVar::replication();
        let prior = model.prior().unwrap();
        let sim = |th: &[f64], rng: &mut dyn RngCore| Ok(model.simulate_mean(th, rng));
        let stat = |x: &DataVector| SuffStat::scalar(x.values()[0]);
        let cfg = AbcConfig { n: 20_000, epsilon: vec![1e9], max_attempts: 40_000 };
        let out = rejection_abc(&prior, &sim, &stat, &model.x0(), &cfg, RngSeed::new(14, 0)).unwrap();
        assert_eq!(out.sample.len(), 20_000);
        assert_eq!(out.acceptance_rate, 1.0);
        let ks = ks_two_sample(&out.sample.coordinate(0), &normal_draws(10.0, 0.02f64.sqrt(), 20_000, 15)).unwrap();
        assert!(ks.passes(), "{ks:?}");
    }

    #[test]
    fn rejection_abc_reports_closest_miss() {
        let model = NormalKnownVar::replication();
        let prior = model.prior().unwrap();
        let sim = |th: &[f64], rng: &mut dyn RngCore| Ok(model.simulate_mean(th, rng));
        let stat = |x: &DataVector| SuffStat::scalar(x.values()[0]);
        let x0 = DataVector::new(vec![50.0]).unwrap();
        let cfg = AbcConfig { n: 10, epsilon: vec![0.1], max_attempts: 3000 };
        match rejection_abc(&prior, &sim, &stat, &x0, &cfg, RngSeed::new(1, 0)) {
            Err(Error::NoAcceptances { attempts, min_distance }) => {
                assert_eq!(attempts, 3000);
                assert!(min_distance > 38.0);
            }
            other => panic!("expected no acceptances, got {other:?}"),
        }
    }

    #[test]
    fn systematic_resample_examples() {
        let pts: Vec<ParamPoint> = [1.0, 2.0].iter().map(|v| ParamPoint::scalar(*v)).collect();
        let degenerate = WeightedSample::new(pts.clone(), vec![0.0, f64::NEG_INFINITY], 0).unwrap().normalize().unwrap();
        let out = systematic_resample(&degenerate, 5, RngSeed::new(0, 0)).unwrap();
        assert_eq!(out.coordinate(0), vec![1.0; 5]);

        let skew = WeightedSample::new(pts, vec![0.75f64.ln(), 0.25f64.ln()], 0).unwrap().normalize().unwrap();
        let out = systematic_resample(&skew, 10_000, RngSeed::new(3, 0)).unwrap();
        let ones = out.coordinate(0).iter().filter(|v| **v == 1.0).count() as f64;
        assert!((ones - 7500.0).abs() <= 3.0 * (10_000.0f64 * 0.75 * 0.25).sqrt());

        let flat: Vec<ParamPoint> = (0..10).map(|v| ParamPoint::scalar(v as f64)).collect();
        let out = systematic_resample(&WeightedSample::uniform(flat, 0), 10, RngSeed::new(5, 0)).unwrap();
        let mut got = out.coordinate(0);
        got.sort_by(f64::total_cmp);
        assert_eq!(got, (0..10).map(|v| v as f64).collect::<Vec<_>>());

        let raw = WeightedSample::new(vec![ParamPoint::scalar(0.0)], vec![0.0], 0).unwrap();
        assert_eq!(systematic_resample(&raw, 3, RngSeed::new(0, 0)).unwrap_err(), Error::NotNormalized);
    }

    #[test]
    fn ks_examples() {
        let a = normal_draws(0.0, 1.0, 10_000, 1);
        assert_eq!(ks_two_sample(&a, &a).unwrap().statistic, 0.0);
        let b = normal_draws(1.0, 1.0, 10_000, 2);
        let ks = ks_two_sample(&a, &b).unwrap();
        assert!((ks.statistic - 0.3829).abs() < 0.03, "{ks:?}");
        assert!(!ks.passes());
        assert!(matches!(ks_two_sample(&a[..10], &b), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn ks_false_rejection_rate_is_near_one_percent() {
        let passes = (0..100u64)
            .filter(|s| {
                let a = normal_draws(0.0, 1.0, 10_000, 1000 + 2 * s);
                let b = normal_draws(0.0, 1.0, 10_000, 1001 + 2 * s);
                ks_two_sample(&a, &b).unwrap().passes()
            })
            .count();
        assert!(passes >= 97, "{passes}/100 passed");
    }

    #[test]
    fn gamma_draws_match_moments() {
        let g = Gamma::new(3.0, 2.0).unwrap();
        let xs = draw_from(&g, 50_000, RngSeed::new(1, 1)).unwrap();
        let mean = xs.iter().map(|v| v[0]).sum::<f64>() / xs.len() as f64;
        assert!((mean - 1.5).abs() < 0.02);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn resample_keeps_support(ws in proptest::collection::vec(0.01f64..1.0, 2..30), m in 1usize..200, seed in any::<u64>()) {
            let pts: Vec<ParamPoint> = (0..ws.len()).map(|i| ParamPoint::scalar(i as f64)).collect();
            let lw: Vec<f64> = ws.iter().map(|w| w.ln()).collect();
            let s = WeightedSample::new(pts, lw, 0).unwrap().normalize().unwrap();
            let out = systematic_resample(&s, m, RngSeed::new(seed, 0)).unwrap();
            prop_assert_eq!(out.len(), m);
            let total: f64 = ws.iter().sum();
            for (i, w) in ws.iter().enumerate() {
                let count = out.coordinate(0).iter().filter(|v| **v == i as f64).count() as f64;
                prop_assert!((count - m as f64 * w / total).abs() <= 1.0 + 1e-9);
            }
        }
    }
}
