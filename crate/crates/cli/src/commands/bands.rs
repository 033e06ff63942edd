//! `bands`: `exp(h(θ)·t)` for preset tilts and for the configured model.

use serde::Serialize;
use tiltprior::ordering::{tilt_band, BandTable};
use tiltprior::{GridSpec, TiltFn, TiltProvenance};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output};
use crate::setup;

#[derive(Debug, Serialize)]
struct BandSummary {
    name: String,
    epsilons: Vec<f64>,
    violation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary {
    presets: Vec<BandSummary>,
    model: Option<BandSummary>,
}

fn preset(name: &str) -> CliResult<TiltFn> {
    let p = TiltProvenance::LikelihoodGeneral;
    Ok(match name {
        "increasing" => TiltFn::scalar(p, |th| th[0]),
        "decreasing" => TiltFn::scalar(p, |th| -th[0]),
        "non-monotone" => TiltFn::scalar(p, |th| -th[0] * th[0]),
        // `h(θ) = θ` with an undefined value near θ = 1; exercises the violation path.
        "corrupted" => TiltFn::scalar(p, |th| if (th[0] - 1.0).abs() < 0.006 { f64::NAN } else { th[0] }),
        other => return Err(CliError::Config(format!("unknown band preset `{other}`"))),
    })
}

/// Rows `θ, h(θ)` followed by the band at each `t` of every table (all share the grid).
fn rows(tables: &[BandTable], columns: &[(usize, usize)]) -> Vec<Vec<Cell>> {
    let first = &tables[0];
    (0..first.thetas.len())
        .map(|i| {
            let mut row: Vec<Cell> = vec![first.thetas[i].into(), first.h[i].into()];
            row.extend(columns.iter().map(|&(table, col)| tables[table].values[i][col].into()));
            row
        })
        .collect()
}

fn violation_error(name: &str, theta: f64) -> CliError {
    CliError::Violation(format!("band of `{name}` is not monotone in t at theta = {theta}"))
}

pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> CliResult<()> {
    let b = &cfg.bands;
    if b.epsilons.is_empty() || b.epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(CliError::Config("bands.epsilons must be finite and >= 0".into()));
    }
    let grid = GridSpec::univariate(b.lower, b.upper, b.points)?;
    let mut summary = Summary { presets: Vec::new(), model: None };
    let mut violations = Vec::new();

    // Columns t = −ε_k (descending |t|), 0, then +ε_k (ascending).
    let mut eps_sorted = b.epsilons.clone();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut columns: Vec<(usize, usize)> = (0..eps_sorted.len()).map(|k| (k, 0)).collect();
    columns.push((0, 2));
    columns.extend((0..eps_sorted.len()).rev().map(|k| (k, 4)));
    let mut header = vec!["theta".to_string(), "h".to_string()];
    header.extend(eps_sorted.iter().map(|e| format!("t={}", -e)));
    header.push("t=0".to_string());
    header.extend(eps_sorted.iter().rev().map(|e| format!("t={e}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();

    for name in &b.presets {
        let h = preset(name)?;
        let tables = eps_sorted.iter().map(|e| tilt_band(&h, *e, &grid)).collect::<tiltprior::Result<Vec<_>>>()?;
        let violation = tables.iter().find_map(|t| t.violation);
        if let Some(theta) = violation {
            violations.push(violation_error(name, theta));
        }
        out.csv(&format!("bands_{name}.csv"), &header_refs, rows(&tables, &columns))?;
        summary.presets.push(BandSummary { name: name.clone(), epsilons: eps_sorted.clone(), violation });
    }
    out.stage("presets");

    let (base, tilt) = setup::base_and_tilt(cfg)?;
    let (eps, _) = setup::epsilon(cfg)?;
    let model_grid = setup::univariate_grid(cfg, &[base.as_ref()])?;
    let table = tilt_band(&tilt, eps, &model_grid)?;
    if let Some(theta) = table.violation {
        violations.push(violation_error("model", theta));
    }
    let mut header = vec!["theta".to_string(), "h".to_string()];
    header.extend(table.ts.iter().map(|t| format!("t={t}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let cols: Vec<(usize, usize)> = (0..5).map(|c| (0, c)).collect();
    let violation = table.violation;
    out.csv("bands_model.csv", &header_refs, rows(&[table], &cols))?;
    summary.model = Some(BandSummary { name: "model".into(), epsilons: vec![eps], violation });
    out.stage("model");
    out.json("summary.json", &summary)?;
    match violations.into_iter().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
