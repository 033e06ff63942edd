//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime and budget.
//!
//! Runs under `cargo test` (harness disabled). Exits non-zero when any criterion fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use tiltprior::classes::tilt_from_suffstat;
use tiltprior::density::{std_normal_cdf, std_normal_quantile, Gamma, MvNormal, Normal};
use tiltprior::duality::{conjugate_log_ratio, scalar_points, spread, tilted_log_ratio};
use tiltprior::kolmogorov::{
    covering_grid, default_bracket_top, elicit_epsilon, elicitation_grid, kolmogorov_distance,
};
use tiltprior::models::{NormalKnownVar, PoissonGamma, StudentTLocation};
use tiltprior::ordering::{class_order_chain, mtp2_check, random_pairs, Relation};
use tiltprior::samplers::{
    draw_from, ks_two_sample, rejection_abc, sample_posterior_x0, sample_posterior_x0_conjugate,
    sample_posterior_xprime, sample_prior_member, systematic_resample, AbcConfig, ImportanceOutput, Pooling, RngCore,
};
use tiltprior::{DataVector, Density, PriorClass, RngSeed, SuffStat, WeightedSample};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_budget = elapsed <= budget;
    let pass = outcome.is_ok() && in_budget;
    let detail = match &outcome {
        Ok(d) | Err(d) => d.clone(),
    };
    let over = if in_budget { String::new() } else { " [over budget]".to_string() };
    println!(
        "{} {id:>2} {name} ({:.2}s / {:.0}s){over}: {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    pass
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("thread pool").install(f)
}

fn column(sample: &WeightedSample) -> Vec<f64> {
    sample.coordinate(0)
}

fn resample(out: &ImportanceOutput, n: usize, seed: RngSeed) -> Vec<f64> {
    column(&systematic_resample(&out.sample, n, seed).expect("resample"))
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

// 1. Conjugate shift leaves the posterior kernel unchanged.
fn duality() -> Outcome {
    let normal = NormalKnownVar::replication();
    let poisson = PoissonGamma::new(10, 2.0, 1.0, 30.0).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in [-1.0, -0.5, 0.5, 1.0] {
        let n = normal.expfam().map_err(|e| e.to_string())?;
        let r = conjugate_log_ratio(&n, &[normal.xbar0], &[t], &scalar_points(9.0, 11.0, 1001)).map_err(|e| e.to_string())?;
        worst = worst.max(spread(&r).map_err(|e| e.to_string())?);
        let p = poisson.expfam().map_err(|e| e.to_string())?;
        let r = conjugate_log_ratio(&p, &[30.0], &[t], &scalar_points(0.5, 8.0, 1001)).map_err(|e| e.to_string())?;
        worst = worst.max(spread(&r).map_err(|e| e.to_string())?);
    }
    check(worst < 1e-10, format!("max log-ratio spread {worst:.3e} (< 1e-10)"))
}

// 2. Derivative-tilt deviation grows as t².
fn taylor() -> Outcome {
    let model = StudentTLocation { nu: 3.0 };
    let x0 = DataVector::new(vec![0.5]).map_err(|e| e.to_string())?;
    let base: Arc<dyn Density> = Arc::new(Normal::new(0.0, 1.0).map_err(|e| e.to_string())?);
    let tilt = tilt_from_suffstat(Arc::new(model), &x0).map_err(|e| e.to_string())?;
    let class = PriorClass::abc(base, tilt, vec![0.1]).map_err(|e| e.to_string())?;
    let thetas = scalar_points(-4.0, 4.0, 1001);
    let mut dev = Vec::new();
    for t in [0.01, 0.02, 0.04] {
        let r = tilted_log_ratio(&class, &model, &[0.5], &[t], &thetas).map_err(|e| e.to_string())?;
        dev.push(spread(&r).map_err(|e| e.to_string())?);
    }
    let ratios: Vec<f64> = dev.windows(2).map(|w| w[1] / w[0]).collect();
    check(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("deviation ratios per doubling {ratios:.3?} (in [3.5, 4.5])"),
    )
}

// 3. Both class constructions agree for the Normal model; exact posterior.
fn replication() -> Outcome {
    let model = NormalKnownVar::replication();
    let abc = model.abc_class(1.0).map_err(|e| e.to_string())?;
    let abc_e = model.normal_class_e(1.0).map_err(|e| e.to_string())?;
    let mut gap: f64 = 0.0;
    for t in [-1.0, 0.0, 1.0] {
        let a = abc.make_member(&[t]).map_err(|e| e.to_string())?;
        let e = abc_e.make_member(&[t]).map_err(|e| e.to_string())?;
        let grid = covering_grid(&[abc.base().as_ref(), &a, &e], 4001).map_err(|e| e.to_string())?;
        for x in grid.axis(0).nodes() {
            let pa = a.member_log_pdf(&[x], true).map_err(|e| e.to_string())?.exp();
            let pe = e.member_log_pdf(&[x], true).map_err(|e| e.to_string())?.exp();
            gap = gap.max((pa - pe).abs());
        }
    }
    let truth = model.truth();
    let exact = (truth.mean - 9.9875).abs() < 1e-12 && (truth.variance - 0.01).abs() < 1e-12;
    check(
        gap < 1e-6 && exact,
        format!("route gap {gap:.3e} (< 1e-6); posterior N({:.6}, {:.6})", truth.mean, truth.variance),
    )
}

struct FourSamples {
    columns: [Vec<f64>; 4],
    ess: [f64; 4],
}

const NAMES: [&str; 4] = ["true", "abc", "pooled", "conjugate"];

/// The four posteriors for the Normal model at `eps`, each with `n` equally weighted draws.
fn four_samples(eps: f64, n: usize, n_t: usize, seed: u64) -> Result<FourSamples, String> {
    let model = NormalKnownVar::replication();
    let seed = RngSeed::new(seed, 0);
    let x0 = model.x0();
    let truth = model.truth();
    let exact = Normal::from_variance(truth.mean, truth.variance).map_err(|e| e.to_string())?;
    let true_draws: Vec<f64> =
        draw_from(&exact, n, seed.substream(1)).map_err(|e| e.to_string())?.into_iter().map(|p| p[0]).collect();

    let prior = model.prior().map_err(|e| e.to_string())?;
    let simulator = |theta: &[f64], rng: &mut dyn RngCore| Ok(model.simulate_mean(theta, rng));
    let suff = |x: &DataVector| SuffStat::scalar(x.values()[0]);
    let cfg = AbcConfig { n, epsilon: vec![eps], max_attempts: 2_000_000_000 };
    let abc = rejection_abc(&prior, &simulator, &suff, &x0, &cfg, seed.substream(2)).map_err(|e| e.to_string())?;
    if abc.sample.len() < n {
        return Err(format!("rejection ABC accepted only {}", abc.sample.len()));
    }

    let class = model.abc_class(eps).map_err(|e| e.to_string())?;
    let pooled = sample_posterior_x0(
        &class,
        model.suffstat_model().as_ref(),
        &x0,
        n_t,
        1,
        Pooling::Evidence,
        seed.substream(3),
    )
    .map_err(|e| e.to_string())?;
    let conj = sample_posterior_x0_conjugate(
        &model.expfam().map_err(|e| e.to_string())?,
        &x0,
        &[eps],
        n_t,
        1,
        Pooling::Evidence,
        seed.substream(5),
    )
    .map_err(|e| e.to_string())?;
    Ok(FourSamples {
        columns: [
            true_draws,
            column(&abc.sample),
            resample(&pooled, n, seed.substream(4)),
            resample(&conj, n, seed.substream(6)),
        ],
        ess: [n as f64, n as f64, pooled.ess, conj.ess],
    })
}

fn pairwise_ks(s: &FourSamples, pairs: &[(usize, usize)]) -> Result<(bool, String), String> {
    let mut all = true;
    let mut parts = Vec::new();
    for &(i, j) in pairs {
        let r = ks_two_sample(&s.columns[i], &s.columns[j]).map_err(|e| e.to_string())?;
        all &= r.passes();
        parts.push(format!("{}/{} D={:.4}", NAMES[i], NAMES[j], r.statistic));
    }
    Ok((all, parts.join(", ")))
}

// 4. Four posteriors at ε = 1.
fn four_posteriors() -> Outcome {
    const N: usize = 50_000;
    const N_T: usize = 800_000;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut margins = Vec::new();
    for seed in [1u64, 2, 3] {
        let s = single_threaded(|| four_samples(1.0, N, N_T, seed))?;
        if s.ess.iter().any(|e| *e < N as f64) {
            ok = false;
            lines.push(format!("seed {seed}: ess {:.0?} below {N}", s.ess));
        }
        let (pass, ks) = pairwise_ks(&s, &[(1, 2), (1, 3), (2, 3)])?;
        ok &= pass;
        // Lower end of a 3-SE band on each approximate sd must clear the true sd 0.1.
        for k in 1..4 {
            let v = sd(&s.columns[k]);
            let margin = v - 3.0 * v / (2.0 * (N as f64 - 1.0)).sqrt() - 0.1;
            ok &= margin > 0.0;
            margins.push(margin);
        }
        if seed == 1 {
            lines.push(format!("ks {ks}"));
        }
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    lines.push(format!("min sd margin over 3 seeds {min_margin:.4}"));
    check(ok, lines.join("; "))
}

// 5. ε → 0 collapse.
fn collapse() -> Outcome {
    const N: usize = 50_000;
    let s = four_samples(1e-4, N, 200_000, 7)?;
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).collect();
    let (pass, ks) = pairwise_ks(&s, &pairs)?;
    check(pass, ks)
}

// 6. Orderings and MTP2.
fn ordering() -> Outcome {
    let ts = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let normal = NormalKnownVar::replication().abc_class(1.0).map_err(|e| e.to_string())?;
    let poisson = PoissonGamma::new(10, 2.0, 1.0, 30.0)
        .and_then(|p| p.abc_class(1.0))
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, class) in [("normal", &normal), ("poisson", &poisson)] {
        let lo = class.make_member(&[-1.0]).map_err(|e| e.to_string())?;
        let hi = class.make_member(&[1.0]).map_err(|e| e.to_string())?;
        let grid = covering_grid(&[class.base().as_ref(), &lo, &hi], 4001).map_err(|e| e.to_string())?;
        let chain = class_order_chain(class, &ts, &grid, 1e-9).map_err(|e| e.to_string())?;
        let forward = chain.verdicts.iter().all(|v| v.relation == Relation::LeqLr);
        let negated = PriorClass::abc(class.base().clone(), class.tilt().negated(), vec![1.0]).map_err(|e| e.to_string())?;
        let back = class_order_chain(&negated, &ts, &grid, 1e-9).map_err(|e| e.to_string())?;
        let reversed = back.verdicts.iter().all(|v| v.relation == Relation::GeqLr);
        ok &= forward && reversed;
        notes.push(format!("{name}: leq_lr chain {forward}, negated reverses {reversed}"));
    }
    for (rho, expect) in [(0.5, true), (-0.8, false)] {
        let d = MvNormal::bivariate(rho).map_err(|e| e.to_string())?;
        let pairs = random_pairs(&d, 1000, RngSeed::new(11, 0)).map_err(|e| e.to_string())?;
        let r = mtp2_check(&d, &pairs, 1e-9).map_err(|e| e.to_string())?;
        ok &= r.holds == expect && (expect || r.witness.is_some());
        notes.push(format!("mtp2 rho={rho}: {}", r.holds));
    }
    check(ok, notes.join("; "))
}

// 7. Kolmogorov distances and elicitation.
fn kolmogorov() -> Outcome {
    let model = NormalKnownVar::replication();
    let class = model.abc_class(1.0).map_err(|e| e.to_string())?;
    let s = model.s2.sqrt();
    let mut worst: f64 = 0.0;
    for t in [0.1, 0.5, 1.0] {
        let m = class.make_member(&[t]).map_err(|e| e.to_string())?;
        let grid = covering_grid(&[class.base().as_ref(), &m], 20_001).map_err(|e| e.to_string())?;
        let k = kolmogorov_distance(class.base().as_ref(), &m, &grid).map_err(|e| e.to_string())?;
        worst = worst.max((k - (2.0 * std_normal_cdf(t / (2.0 * s)) - 1.0)).abs());
    }
    let base = Arc::clone(class.base());
    let top = default_bracket_top(&base, class.tilt()).map_err(|e| e.to_string())?;
    let grid = elicitation_grid(&base, &[class.tilt().clone()], top, 20_001).map_err(|e| e.to_string())?;
    let e = elicit_epsilon(base, class.tilt(), 0.1, &grid, 1e-8).map_err(|e| e.to_string())?;
    let mut ks = Vec::new();
    for k in 1..=6 {
        let t = 10f64.powi(-k);
        let m = class.make_member(&[t]).map_err(|e| e.to_string())?;
        let grid = covering_grid(&[class.base().as_ref(), &m], 20_001).map_err(|e| e.to_string())?;
        ks.push(kolmogorov_distance(class.base().as_ref(), &m, &grid).map_err(|e| e.to_string())?);
    }
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    let closed = 2.0 * s * std_normal_quantile(0.55);
    check(
        worst < 1e-6 && (e.t_star - 0.03554).abs() < 1e-4 && decreasing,
        format!(
            "closed-form gap {worst:.2e}; t* = {:.6} (closed form {closed:.6}); K(10^-k) decreasing {decreasing}",
            e.t_star
        ),
    )
}

/// One importance-sampling case: a weighted sample and an exact target.
fn is_case(out: &ImportanceOutput, exact: &dyn Density, exact_mean: f64, seed: RngSeed) -> Result<bool, String> {
    let mean = out.sample.mean(0).map_err(|e| e.to_string())?;
    let se = out.sample.mean_standard_error(0).map_err(|e| e.to_string())?;
    let m = out.ess.floor() as usize;
    let drawn = resample(out, m, seed.substream(1));
    let reference: Vec<f64> =
        draw_from(exact, 100_000, seed.substream(2)).map_err(|e| e.to_string())?.into_iter().map(|p| p[0]).collect();
    let ks = ks_two_sample(&drawn, &reference).map_err(|e| e.to_string())?;
    Ok((mean - exact_mean).abs() <= 3.0 * se && ks.passes())
}

// 8. Importance samplers against closed forms, 20 seeds each.
fn importance() -> Outcome {
    const N: usize = 100_000;
    let normal = NormalKnownVar::replication();
    let poisson = PoissonGamma::new(10, 2.0, 1.0, 30.0).map_err(|e| e.to_string())?;
    let n_class = normal.abc_class(1.0).map_err(|e| e.to_string())?;
    let p_class = poisson.abc_class(1.0).map_err(|e| e.to_string())?;
    let (tn, tp) = (0.1, 0.5);
    let shift = normal.n * normal.s2 / normal.sigma2;
    let n_member_exact = Normal::from_variance(normal.m + shift * tn, normal.s2).map_err(|e| e.to_string())?;
    let p_member_exact = Gamma::new(poisson.r + tp, poisson.v).map_err(|e| e.to_string())?;
    let n_post = normal.shifted_truth(tn);
    let n_post_exact = Normal::from_variance(n_post.mean, n_post.variance).map_err(|e| e.to_string())?;
    let p_post_exact = poisson.posterior(tp).map_err(|e| e.to_string())?;

    let mut passes = [0usize; 4];
    for s in 1..=20u64 {
        let seed = RngSeed::new(s, 0);
        let nm = n_class.make_member(&[tn]).map_err(|e| e.to_string())?;
        let pm = p_class.make_member(&[tp]).map_err(|e| e.to_string())?;
        let cases: [(ImportanceOutput, &dyn Density, f64); 4] = [
            (
                sample_prior_member(&nm, N, seed.substream(1)).map_err(|e| e.to_string())?,
                &n_member_exact,
                n_member_exact.location(),
            ),
            (
                sample_prior_member(&pm, N, seed.substream(2)).map_err(|e| e.to_string())?,
                &p_member_exact,
                p_member_exact.shape() / p_member_exact.rate(),
            ),
            (
                sample_posterior_xprime(&n_class, normal.suffstat_model().as_ref(), &normal.x0(), &[tn], N, seed.substream(3))
                    .map_err(|e| e.to_string())?,
                &n_post_exact,
                n_post.mean,
            ),
            (
                sample_posterior_xprime(&p_class, poisson.suffstat_model().as_ref(), &poisson.x0(), &[tp], N, seed.substream(4))
                    .map_err(|e| e.to_string())?,
                &p_post_exact,
                p_post_exact.shape() / p_post_exact.rate(),
            ),
        ];
        for (k, (out, exact, mean)) in cases.iter().enumerate() {
            if is_case(out, *exact, *mean, seed.substream(10 + k as u32))? {
                passes[k] += 1;
            }
        }
    }
    check(
        passes.iter().all(|p| *p >= 19),
        format!(
            "passes of 20: normal member {}, poisson member {}, normal x' posterior {}, poisson x' posterior {}",
            passes[0], passes[1], passes[2], passes[3]
        ),
    )
}

fn digests(dir: &Path) -> Result<Vec<(String, String)>, String> {
    tiltprior_cli::output::read_digests(dir).map_err(|e| e.to_string())
}

// 9. CLI outputs are identical across reruns and thread counts.
fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_tiltprior");
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [(&str, &[&str]); 5] = [
        ("bands", &["--set", "epsilon=1"]),
        ("classes", &["--set", "epsilon=1", "--set", "model=poisson"]),
        ("compare-posteriors", &["--set", "epsilon=1", "--set", "sampler.n=20000", "--set", "sampler.n-t=100000"]),
        ("elicit", &["--set", "kappa=0.1"]),
        ("diagnostics", &["--set", "epsilon=1"]),
    ];
    let mut notes = Vec::new();
    let mut ok = true;
    for (cmd, args) in commands {
        let mut runs = Vec::new();
        for (k, threads) in ["1", "8", "8"].iter().enumerate() {
            let out = root.path().join(format!("{cmd}-{k}"));
            let status = Command::new(bin)
                .arg(cmd)
                .args(args)
                .args(["--threads", threads, "--seed", "42", "--out"])
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            if !status.status.success() {
                return Err(format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            runs.push(digests(&out.join(cmd))?);
        }
        let same = !runs[0].is_empty() && runs.iter().all(|r| *r == runs[0]);
        ok &= same;
        notes.push(format!("{cmd} {} files {}", runs[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    check(ok, notes.join("; "))
}

// 10. Rejection ABC acceptance rate against the prior predictive.
fn acceptance_rate() -> Outcome {
    let model = NormalKnownVar::replication();
    let eps = 0.25;
    let prior = model.prior().map_err(|e| e.to_string())?;
    let simulator = |theta: &[f64], rng: &mut dyn RngCore| Ok(model.simulate_mean(theta, rng));
    let suff = |x: &DataVector| SuffStat::scalar(x.values()[0]);
    let cfg = AbcConfig { n: 200_000, epsilon: vec![eps], max_attempts: 10_000_000 };
    let out = rejection_abc(&prior, &simulator, &suff, &model.x0(), &cfg, RngSeed::new(5, 0)).map_err(|e| e.to_string())?;
    let sd = (model.s2 + model.sigma2 / model.n).sqrt();
    let p = std_normal_cdf((model.xbar0 + eps - model.m) / sd) - std_normal_cdf((model.xbar0 - eps - model.m) / sd);
    let se = (p * (1.0 - p) / out.attempts as f64).sqrt();
    let z = (out.acceptance_rate - p) / se;
    check(
        z.abs() <= 3.0,
        format!("rate {:.5} vs {p:.5} over {} attempts, z = {z:.2}", out.acceptance_rate, out.attempts),
    )
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "duality identity", s(1), duality),
        run(2, "derivative-tilt fidelity", s(1), taylor),
        run(3, "normal replication", s(1), replication),
        run(4, "four posteriors at eps = 1", s(60), four_posteriors),
        run(5, "collapse at eps = 1e-4", s(60), collapse),
        run(6, "ordering suite", s(5), ordering),
        run(7, "kolmogorov distance", s(5), kolmogorov),
        run(8, "importance samplers", s(120), importance),
        run(9, "cli determinism", s(60), determinism),
        run(10, "abc acceptance rate", s(30), acceptance_rate),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
