//! `classes`: base prior and members at `t = −ε`, an internal `t` and `t = +ε`
//! for the derivative-tilt class and the conjugate-shift class.

use serde::Serialize;
use tiltprior::density::grid_pdf;
use tiltprior::{conjugate_shift, PriorClass};

use crate::config::{ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output};
use crate::setup;

#[derive(Debug, Serialize)]
struct MemberGap {
    t: f64,
    /// Largest pointwise gap between the two routes' normalized densities.
    route_gap: f64,
    /// Largest gap between the conjugate-route member and its closed form.
    closed_form_gap: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    model: ModelKind,
    epsilon: f64,
    ts: Vec<f64>,
    grid_lower: f64,
    grid_upper: f64,
    grid_points: usize,
    members: Vec<MemberGap>,
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn densities(class: &PriorClass, t: f64, xs: &[f64]) -> CliResult<Vec<f64>> {
    let member = class.make_member(&[t])?;
    member.log_normalizer()?;
    Ok(xs.iter().map(|x| grid_pdf(&member, &[*x])).collect())
}

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    if !matches!(cfg.model, ModelKind::Normal | ModelKind::Poisson) {
        return Err(CliError::Config("classes needs the normal or poisson model".into()));
    }
    let (eps, _) = setup::epsilon(cfg)?;
    let f = cfg.classes.internal_fraction;
    if !(-1.0..=1.0).contains(&f) {
        return Err(CliError::Config("classes.internal-fraction must lie in [-1, 1]".into()));
    }
    let ts = [-eps, f * eps, eps];
    let abc = setup::abc_class(cfg, eps)?;
    let abc_e = setup::abc_e_class(cfg, eps)?;
    let spec = abc_e.expfam().cloned().ok_or_else(|| CliError::Config("class has no conjugate family".into()))?;

    let lower = abc.make_member(&[-eps])?;
    let upper = abc.make_member(&[eps])?;
    let grid = setup::univariate_grid(cfg, &[abc.base().as_ref(), &lower, &upper])?;
    let xs = grid.axis(0).nodes();
    let base: Vec<f64> = xs.iter().map(|x| grid_pdf(abc.base().as_ref(), &[*x])).collect();
    out.stage("setup");

    let mut columns: Vec<(String, Vec<f64>)> = vec![("base".into(), base)];
    let mut members = Vec::new();
    for t in ts {
        let d = densities(&abc, t, &xs)?;
        let e = densities(&abc_e, t, &xs)?;
        let closed = conjugate_shift(&spec, &[t])?.prior()?;
        let c: Vec<f64> = xs.iter().map(|x| grid_pdf(closed.as_ref(), &[*x])).collect();
        members.push(MemberGap { t, route_gap: max_gap(&d, &e), closed_form_gap: max_gap(&e, &c) });
        columns.push((format!("abc t={t}"), d));
        columns.push((format!("abc-e t={t}"), e));
        columns.push((format!("closed-form t={t}"), c));
    }
    out.stage("members");

    let mut header = vec!["theta"];
    header.extend(columns.iter().map(|(name, _)| name.as_str()));
    let rows = (0..xs.len())
        .map(|i| {
            let mut row: Vec<Cell> = vec![xs[i].into()];
            row.extend(columns.iter().map(|(_, col)| Cell::from(col[i])));
            row
        })
        .collect();
    out.csv("classes.csv", &header, rows)?;
    let summary = Summary {
        model: cfg.model,
        epsilon: eps,
        ts: ts.to_vec(),
        grid_lower: xs[0],
        grid_upper: xs[xs.len() - 1],
        grid_points: xs.len(),
        members,
    };
    out.json("summary.json", &summary)?;
    out.stage("write");
    Ok(())
}
