//! `elicit`: ε from a bound κ on the Kolmogorov distance between the base
//! prior and the members at `±ε`.

use serde::Serialize;
use tiltprior::density::grid_pdf;
use tiltprior::kolmogorov::{elicit_epsilon, Elicitation};
use tiltprior::{PriorClass, RngSeed};

use crate::config::{Bound, ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output};
use crate::setup;

#[derive(Debug, Serialize)]
struct UnivariateSummary {
    model: ModelKind,
    kappa: f64,
    t_star: f64,
    distance: f64,
    hit_bracket_top: bool,
    bracket_top: f64,
}

#[derive(Debug, Serialize)]
struct RegressionSummary {
    kappa: f64,
    epsilon: Vec<f64>,
    hit_bracket_top: Vec<bool>,
    base_mean: Vec<f64>,
    min_mean: Vec<f64>,
    max_mean: Vec<f64>,
    min_ess: f64,
}

fn write_curve(out: &mut Output, name: &str, curve: &[(f64, f64)]) -> CliResult<()> {
    out.csv(name, &["t", "distance"], curve.iter().map(|(t, k)| vec![Cell::from(*t), Cell::from(*k)]).collect())
}

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    let kappa = match cfg.bound()? {
        Bound::Kappa(k) => k,
        Bound::Epsilon(_) => return Err(CliError::Config("elicit needs kappa, not epsilon".into())),
    };
    match cfg.model {
        ModelKind::PoissonRegression => regression(cfg, kappa, out),
        _ => univariate(cfg, kappa, out),
    }
}

fn univariate(cfg: &ExperimentConfig, kappa: f64, out: &mut Output) -> CliResult<()> {
    let (base, tilt, grid) = setup::elicitation_inputs(cfg)?;
    let e: Elicitation = match elicit_epsilon(base.clone(), &tilt, kappa, &grid, cfg.elicit.tol) {
        Ok(e) => e,
        Err(tiltprior::Error::NonMonotoneDistance { at, curve }) => {
            write_curve(out, "curve.csv", &curve)?;
            return Err(CliError::Numerical(format!("Kolmogorov distance is not monotone in t near t = {at}")));
        }
        Err(e) => return Err(e.into()),
    };
    out.stage("elicit");
    write_curve(out, "curve.csv", &e.curve)?;

    // Members at the elicited bounds, on a grid covering all three densities.
    let class = PriorClass::abc(base.clone(), tilt, vec![e.t_star])?;
    let lower = class.make_member(&[-e.t_star])?;
    let upper = class.make_member(&[e.t_star])?;
    lower.log_normalizer()?;
    upper.log_normalizer()?;
    let bounds_grid = setup::univariate_grid(cfg, &[base.as_ref(), &lower, &upper])?;
    let rows = bounds_grid
        .axis(0)
        .nodes()
        .into_iter()
        .map(|x| {
            vec![
                x.into(),
                grid_pdf(base.as_ref(), &[x]).into(),
                grid_pdf(&lower, &[x]).into(),
                grid_pdf(&upper, &[x]).into(),
            ]
        })
        .collect();
    let header = ["theta".to_string(), "base".into(), format!("t={}", -e.t_star), format!("t={}", e.t_star)];
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("bounds.csv", &header_refs, rows)?;
    out.json(
        "summary.json",
        &UnivariateSummary {
            model: cfg.model,
            kappa,
            t_star: e.t_star,
            distance: e.distance,
            hit_bracket_top: e.hit_bracket_top,
            bracket_top: e.bracket_top,
        },
    )?;
    out.stage("bounds");
    Ok(())
}

fn regression(cfg: &ExperimentConfig, kappa: f64, out: &mut Output) -> CliResult<()> {
    let per_obs = setup::elicit_regression(cfg, kappa)?;
    out.stage("elicit");
    out.csv(
        "epsilon.csv",
        &["observation", "epsilon", "distance", "hit_bracket_top", "binding_marginal"],
        per_obs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                vec![
                    i.into(),
                    e.t_star.into(),
                    e.distance.into(),
                    e.hit_bracket_top.into(),
                    e.binding_marginal.map_or(Cell::from(""), Cell::from),
                ]
            })
            .collect(),
    )?;

    let epsilon: Vec<f64> = per_obs.iter().map(|e| e.t_star).collect();
    let model = setup::regression(cfg, 1.0)?.with_epsilon(epsilon.clone())?;
    let r = model.robustness_range(cfg.regression.members, cfg.regression.particles, RngSeed::new(cfg.seed, 0))?;
    let widths = r.widths();
    out.csv(
        "robustness.csv",
        &["coefficient", "base_mean", "min_mean", "max_mean", "width"],
        (0..r.base_mean.len())
            .map(|k| {
                vec![k.into(), r.base_mean[k].into(), r.min_mean[k].into(), r.max_mean[k].into(), widths[k].into()]
            })
            .collect(),
    )?;
    out.json(
        "summary.json",
        &RegressionSummary {
            kappa,
            epsilon,
            hit_bracket_top: per_obs.iter().map(|e| e.hit_bracket_top).collect(),
            base_mean: r.base_mean.clone(),
            min_mean: r.min_mean.clone(),
            max_mean: r.max_mean.clone(),
            min_ess: r.min_ess,
        },
    )?;
    out.stage("robustness");
    Ok(())
}
