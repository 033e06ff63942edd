//! `diagnostics`: likelihood-ratio chains over the class, their reversal under
//! a negated tilt, class nesting, and MTP2 checks.

use rand::Rng;
use serde::Serialize;
use tiltprior::density::MvNormal;
use tiltprior::ordering::{class_order_chain, monotonicity, mtp2_check, random_pairs, ChainReport, Monotonicity};
use tiltprior::{Density, GridSpec, PriorClass, RngSeed};

use crate::config::{ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output};
use crate::setup;

#[derive(Debug, Serialize)]
struct Mtp2Row {
    fixture: String,
    holds: bool,
    worst_margin: f64,
    witness: Option<(Vec<f64>, Vec<f64>)>,
    pairs: usize,
}

#[derive(Debug, Serialize)]
struct NestingRow {
    inner_epsilon: f64,
    outer_epsilon: f64,
    draws: usize,
    /// Members of the inner class that the outer class rejected.
    failures: usize,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    chain: Option<ChainReport>,
    reversed_chain: Option<ChainReport>,
    reversal_holds: Option<bool>,
    nesting: Option<NestingRow>,
    mtp2: Vec<Mtp2Row>,
    tilt_directions: Vec<TiltDirection>,
    violations: Vec<String>,
}

#[derive(Debug, Serialize)]
struct TiltDirection {
    observation: usize,
    coefficient: usize,
    direction: Monotonicity,
    expected: Monotonicity,
}

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    let mut summary = Summary::default();
    let seed = RngSeed::new(cfg.seed, 0);
    match cfg.model {
        ModelKind::PoissonRegression => regression(cfg, seed, &mut summary)?,
        _ => univariate(cfg, seed, &mut summary, out)?,
    }
    out.stage("ordering");

    for (k, rho) in cfg.diagnostics.rhos.iter().enumerate() {
        let d = MvNormal::bivariate(*rho)?;
        summary.mtp2.push(mtp2_row(format!("bivariate-normal rho={rho}"), &d, cfg, seed.substream(10 + k as u32))?);
    }
    out.stage("mtp2");

    out.csv(
        "mtp2.csv",
        &["fixture", "holds", "worst_margin", "witness_a", "witness_b", "pairs"],
        summary
            .mtp2
            .iter()
            .map(|r| {
                let (a, b) = r.witness.clone().map_or((String::new(), String::new()), |(a, b)| (join(&a), join(&b)));
                vec![r.fixture.clone().into(), r.holds.into(), r.worst_margin.into(), a.into(), b.into(), r.pairs.into()]
            })
            .collect(),
    )?;
    out.json("summary.json", &summary)?;
    out.stage("write");
    match summary.violations.first() {
        Some(v) => Err(CliError::Violation(v.clone())),
        None => Ok(()),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

fn mtp2_row(fixture: String, d: &dyn Density, cfg: &ExperimentConfig, seed: RngSeed) -> CliResult<Mtp2Row> {
    let pairs = random_pairs(d, cfg.diagnostics.mtp2_pairs, seed)?;
    let r = mtp2_check(d, &pairs, cfg.diagnostics.tol)?;
    Ok(Mtp2Row { fixture, holds: r.holds, worst_margin: r.worst_margin, witness: r.witness, pairs: r.pairs_checked })
}

fn chain_rows(label: &str, chain: &ChainReport) -> Vec<Vec<Cell>> {
    chain
        .verdicts
        .iter()
        .zip(chain.ts.windows(2))
        .map(|(v, w)| {
            let relation = serde_json::to_value(v.relation).ok().and_then(|s| s.as_str().map(String::from));
            let (wa, wb) = v.witness.map_or((None, None), |(a, b)| (Some(a), Some(b)));
            vec![
                label.into(),
                w[0].into(),
                w[1].into(),
                relation.unwrap_or_default().into(),
                v.max_ratio_slope_violation.into(),
                wa.into(),
                wb.into(),
            ]
        })
        .collect()
}

fn univariate(cfg: &ExperimentConfig, seed: RngSeed, summary: &mut Summary, out: &mut Output) -> CliResult<()> {
    let (eps, _) = setup::epsilon(cfg)?;
    if !(eps > 0.0) {
        return Err(CliError::Config("diagnostics needs epsilon > 0".into()));
    }
    let mut ts: Vec<f64> = cfg.diagnostics.fractions.iter().map(|f| f * eps).collect();
    if ts.iter().any(|t| !(t.abs() <= eps)) {
        return Err(CliError::Config("diagnostics.fractions must lie in [-1, 1]".into()));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let class = setup::abc_class(cfg, eps)?;
    let negated = PriorClass::abc(class.base().clone(), class.tilt().negated(), vec![eps])?;
    let grid = chain_grid(cfg, &class, eps)?;
    let chain = class_order_chain(&class, &ts, &grid, cfg.diagnostics.tol)?;
    let reversed = class_order_chain(&negated, &ts, &grid, cfg.diagnostics.tol)?;
    let reversal_holds = chain.verdicts.iter().zip(&reversed.verdicts).all(|(a, b)| b.relation == a.relation.reversed());
    if !chain.consistent {
        summary.violations.push(format!("lr chain of the class is not {:?} throughout", chain.expected));
    }
    if !reversed.consistent || !reversal_holds {
        summary.violations.push("negating the tilt does not reverse the lr chain".into());
    }
    let mut rows = chain_rows("class", &chain);
    rows.extend(chain_rows("negated-tilt", &reversed));
    out.csv(
        "chain.csv",
        &["fixture", "t_lo", "t_hi", "relation", "max_ratio_slope_violation", "witness_lo", "witness_hi"],
        rows,
    )?;

    let nesting = nesting(&class, eps, cfg.diagnostics.nesting_draws, seed.substream(1))?;
    if nesting.failures > 0 {
        summary.violations.push(format!("{} members of the inner class lie outside the outer class", nesting.failures));
    }
    summary.chain = Some(chain);
    summary.reversed_chain = Some(reversed);
    summary.reversal_holds = Some(reversal_holds);
    summary.nesting = Some(nesting);
    Ok(())
}

/// Grid covering the base and the extreme members of the class.
fn chain_grid(cfg: &ExperimentConfig, class: &PriorClass, eps: f64) -> CliResult<GridSpec> {
    let lower = class.make_member(&[-eps])?;
    let upper = class.make_member(&[eps])?;
    setup::univariate_grid(cfg, &[class.base().as_ref(), &lower, &upper])
}

/// Members drawn from the class at `ε/2` must belong to the class at `ε`.
fn nesting(class: &PriorClass, eps: f64, draws: usize, seed: RngSeed) -> CliResult<NestingRow> {
    let inner = class.with_epsilon(vec![0.5 * eps])?;
    let mut rng = seed.rng(0);
    let mut failures = 0;
    for _ in 0..draws {
        let t = 0.5 * eps * (2.0 * rng.random::<f64>() - 1.0);
        let member = inner.make_member(&[t])?;
        if !(inner.contains(&member)? && class.contains(&member)?) {
            failures += 1;
        }
    }
    Ok(NestingRow { inner_epsilon: 0.5 * eps, outer_epsilon: eps, draws, failures })
}

/// MTP2 of the prior and the direction of each `h_i` along each coefficient.
fn regression(cfg: &ExperimentConfig, seed: RngSeed, summary: &mut Summary) -> CliResult<()> {
    let model = setup::regression(cfg, 1.0)?;
    let prior = model.prior();
    if prior.dim() >= 2 {
        summary.mtp2.push(mtp2_row("regression prior".into(), prior.as_ref(), cfg, seed.substream(2))?);
    }
    let tilt = model.tilt();
    let p = model.p();
    let axis: Vec<f64> = (0..=60).map(|i| -3.0 + 0.1 * f64::from(i)).collect();
    for (i, x) in model.design().iter().enumerate() {
        for j in 0..p {
            let values: Vec<f64> = axis
                .iter()
                .map(|v| {
                    let mut beta = vec![0.0; p];
                    beta[j] = *v;
                    tilt.eval(&beta)[i]
                })
                .collect();
            let direction = monotonicity(&values);
            let expected = if x[j] >= 0.0 { Monotonicity::Increasing } else { Monotonicity::Decreasing };
            if direction != expected {
                summary.violations.push(format!("h_{i} is not {expected:?} in coefficient {j}"));
            }
            summary.tilt_directions.push(TiltDirection { observation: i, coefficient: j, direction, expected });
        }
    }
    Ok(())
}
