//! `compare-posteriors`: four samples for the Normal model at one ε.
//!
//! * `true`: draws from the exact conjugate posterior given `x̄⁰`;
//! * `rejection-abc`: rejection ABC on the simulated sample mean;
//! * `pooled-abc`: the pooled importance sampler over the derivative-tilt class;
//! * `conjugate`: the pooled sampler drawing each slice from its conjugate posterior.
//!
//! The two importance samples are systematically resampled to `sampler.n`
//! equally weighted points so that all four columns have the same length.

use serde::Serialize;
use tiltprior::density::Normal;
use tiltprior::samplers::{
    draw_from, ks_two_sample, rejection_abc, sample_posterior_x0, sample_posterior_x0_conjugate, systematic_resample,
    AbcConfig, ImportanceOutput, KsResult, RngCore,
};
use tiltprior::{DataVector, RngSeed, SuffStat, WeightedSample};

use crate::config::{ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output};
use crate::setup;

pub const METHODS: [&str; 4] = ["true", "rejection-abc", "pooled-abc", "conjugate"];

#[derive(Debug, Serialize)]
struct MethodSummary {
    method: &'static str,
    mean: f64,
    sd: f64,
    /// Effective draws before resampling; the sample size for unweighted methods.
    ess: f64,
}

#[derive(Debug, Serialize)]
struct KsEntry {
    a: &'static str,
    b: &'static str,
    #[serde(flatten)]
    ks: KsResult,
    passes: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    epsilon: f64,
    n: usize,
    true_mean: f64,
    true_sd: f64,
    abc_attempts: u64,
    abc_acceptance_rate: f64,
    methods: Vec<MethodSummary>,
    ks: Vec<KsEntry>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn resampled(output: &ImportanceOutput, n: usize, seed: RngSeed) -> CliResult<Vec<f64>> {
    let sample: WeightedSample = systematic_resample(&output.sample, n, seed)?;
    Ok(sample.coordinate(0))
}

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    if cfg.model != ModelKind::Normal {
        return Err(CliError::Config("compare-posteriors needs the normal model".into()));
    }
    let (eps, _) = setup::epsilon(cfg)?;
    if !(eps > 0.0) {
        return Err(CliError::Config("compare-posteriors needs epsilon > 0".into()));
    }
    let model = setup::normal(cfg)?;
    let s = &cfg.sampler;
    let seed = RngSeed::new(cfg.seed, 0);
    let x0 = model.x0();

    let truth = model.truth();
    let exact = Normal::from_variance(truth.mean, truth.variance)?;
    let true_draws: Vec<f64> = draw_from(&exact, s.n, seed.substream(1))?.into_iter().map(|p| p[0]).collect();
    out.stage("true");

    let abc_cfg = AbcConfig { n: s.n, epsilon: vec![eps], max_attempts: s.max_attempts };
    let prior = model.prior()?;
    let simulator = |theta: &[f64], rng: &mut dyn RngCore| Ok(model.simulate_mean(theta, rng));
    let suff = |x: &DataVector| SuffStat::scalar(x.values()[0]);
    let abc = rejection_abc(&prior, &simulator, &suff, &x0, &abc_cfg, seed.substream(2))?;
    if abc.sample.len() < s.n {
        return Err(CliError::Numerical(format!(
            "rejection ABC accepted {} of {} draws in {} attempts",
            abc.sample.len(),
            s.n,
            abc.attempts
        )));
    }
    let abc_draws = abc.sample.coordinate(0);
    out.stage("rejection-abc");

    let class = model.abc_class(eps)?;
    let pooled = sample_posterior_x0(
        &class,
        model.suffstat_model().as_ref(),
        &x0,
        s.n_t,
        s.m,
        s.pooling,
        seed.substream(3),
    )?;
    let pooled_draws = resampled(&pooled, s.n, seed.substream(4))?;
    out.stage("pooled-abc");

    let conj = sample_posterior_x0_conjugate(&model.expfam()?, &x0, &[eps], s.n_t, s.m, s.pooling, seed.substream(5))?;
    let conj_draws = resampled(&conj, s.n, seed.substream(6))?;
    out.stage("conjugate");

    let columns = [&true_draws, &abc_draws, &pooled_draws, &conj_draws];
    let ess = [s.n as f64, s.n as f64, pooled.ess, conj.ess];
    let rows = (0..s.n)
        .map(|i| {
            let mut row: Vec<Cell> = vec![i.into()];
            row.extend(columns.iter().map(|c| Cell::from(c[i])));
            row
        })
        .collect();
    let mut header = vec!["draw"];
    header.extend(METHODS);
    out.csv("samples.csv", &header, rows)?;

    let mut ks = Vec::new();
    for i in 0..METHODS.len() {
        for j in i + 1..METHODS.len() {
            let r = ks_two_sample(columns[i], columns[j])?;
            ks.push(KsEntry { a: METHODS[i], b: METHODS[j], ks: r, passes: r.passes() });
        }
    }
    out.csv(
        "ks.csv",
        &["a", "b", "statistic", "critical_1pct", "passes"],
        ks.iter()
            .map(|k| vec![k.a.into(), k.b.into(), k.ks.statistic.into(), k.ks.critical_1pct.into(), k.passes.into()])
            .collect(),
    )?;

    let methods: Vec<MethodSummary> = METHODS
        .iter()
        .zip(columns)
        .zip(ess)
        .map(|((method, c), ess)| {
            let (mean, sd) = mean_sd(c);
            MethodSummary { method, mean, sd, ess }
        })
        .collect();
    out.csv(
        "summary.csv",
        &["method", "mean", "sd", "ess"],
        methods.iter().map(|m| vec![m.method.into(), m.mean.into(), m.sd.into(), m.ess.into()]).collect(),
    )?;
    let summary = Summary {
        epsilon: eps,
        n: s.n,
        true_mean: truth.mean,
        true_sd: truth.variance.sqrt(),
        abc_attempts: abc.attempts,
        abc_acceptance_rate: abc.acceptance_rate,
        methods,
        ks,
    };
    out.json("summary.json", &summary)?;
    out.stage("write");
    Ok(())
}
