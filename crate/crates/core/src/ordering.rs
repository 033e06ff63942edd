//! Likelihood-ratio ordering, MTP2 and tilt-band checks on grids.

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{PriorClass, TiltFn};
use crate::density::{grid_pdf, Density};
use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, GridSpec};
use crate::samplers::{draw_from, RngSeed};

/// Default slack on successive log-ratio differences.
pub const DEFAULT_LR_TOL: f64 = 1e-9;

/// Largest mass a grid may miss.
pub const MAX_MISSING_MASS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    LeqLr,
    GeqLr,
    Equal,
    Incomparable,
}

impl Relation {
    pub fn reversed(self) -> Self {
        match self {
            Relation::LeqLr => Relation::GeqLr,
            Relation::GeqLr => Relation::LeqLr,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingVerdict {
    pub relation: Relation,
    /// Grid points where the log-ratio falls and rises; set only when incomparable.
    pub witness: Option<(f64, f64)>,
    /// How far the log-ratio is from being monotone in the closer direction.
    pub max_ratio_slope_violation: f64,
}

pub(crate) fn univariate_grid(grid: &GridSpec) -> Result<Vec<f64>> {
    if grid.dim() != 1 {
        return Err(Error::NotUnivariate { dim: grid.dim() });
    }
    Ok(grid.axis(0).nodes())
}

/// Fails when more than [`MAX_MISSING_MASS`] lies off the grid. The
/// trapezoid mass on the grid is compared with the one on every other node;
/// their difference bounds the discretization error, which is not counted
/// as missing mass.
pub(crate) fn check_grid_mass(xs: &[f64], pdf: &[f64]) -> Result<()> {
    let fine = cumulative_trapezoid(xs, pdf).last().copied().unwrap_or(0.0);
    let coarse_xs: Vec<f64> = xs.iter().step_by(2).copied().collect();
    let coarse_pdf: Vec<f64> = pdf.iter().step_by(2).copied().collect();
    let mut coarse = cumulative_trapezoid(&coarse_xs, &coarse_pdf).last().copied().unwrap_or(0.0);
    if xs.len() % 2 == 0 && xs.len() >= 2 {
        let n = xs.len();
        coarse += 0.5 * (xs[n - 1] - xs[n - 2]) * (pdf[n - 1] + pdf[n - 2]);
    }
    let discretization = (fine - coarse).abs();
    if !(fine + discretization >= 1.0 - MAX_MISSING_MASS) {
        return Err(Error::GridTooNarrow { mass: fine });
    }
    Ok(())
}

fn check_mass(d: &dyn Density, xs: &[f64]) -> Result<()> {
    let pdf: Vec<f64> = xs.iter().map(|x| grid_pdf(d, &[*x])).collect();
    check_grid_mass(xs, &pdf)
}

/// Decides `d1 ≤_lr d2` from the monotonicity of `log d2 − log d1` on the grid.
pub fn lr_order(d1: &dyn Density, d2: &dyn Density, grid: &GridSpec, tol: f64) -> Result<OrderingVerdict> {
    for d in [d1, d2] {
        if d.dim() != 1 {
            return Err(Error::NotUnivariate { dim: d.dim() });
        }
    }
    let nodes = univariate_grid(grid)?;
    check_mass(d1, &nodes)?;
    check_mass(d2, &nodes)?;

    let ratio: Vec<(f64, f64)> = nodes
        .iter()
        .map(|x| (*x, d2.log_pdf(&[*x]) - d1.log_pdf(&[*x])))
        .filter(|(_, r)| r.is_finite())
        .collect();
    if ratio.len() < 2 {
        return Err(Error::GridTooNarrow { mass: 0.0 });
    }

    let (lo, hi) = ratio
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, r)| (lo.min(*r), hi.max(*r)));
    if (hi - lo) / 2.0 <= tol {
        return Ok(OrderingVerdict { relation: Relation::Equal, witness: None, max_ratio_slope_violation: 0.0 });
    }

    let mut min_step = (f64::INFINITY, 0usize);
    let mut max_step = (f64::NEG_INFINITY, 0usize);
    for (i, w) in ratio.windows(2).enumerate() {
        let step = w[1].1 - w[0].1;
        if step < min_step.0 {
            min_step = (step, i);
        }
        if step > max_step.0 {
            max_step = (step, i);
        }
    }
    let fall = (-min_step.0).max(0.0);
    let rise = max_step.0.max(0.0);
    if fall <= tol {
        return Ok(OrderingVerdict { relation: Relation::LeqLr, witness: None, max_ratio_slope_violation: fall });
    }
    if rise <= tol {
        return Ok(OrderingVerdict { relation: Relation::GeqLr, witness: None, max_ratio_slope_violation: rise });
    }
    let (a, b) = (ratio[min_step.1].0, ratio[max_step.1 + 1].0);
    Ok(OrderingVerdict {
        relation: Relation::Incomparable,
        witness: Some((a.min(b), a.max(b))),
        max_ratio_slope_violation: fall.min(rise),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    NonMonotone,
}

/// Direction of a scalar function along the grid nodes where it is finite.
pub fn monotonicity(values: &[f64]) -> Monotonicity {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.windows(2).all(|w| w[1] >= w[0]) {
        Monotonicity::Increasing
    } else if finite.windows(2).all(|w| w[1] <= w[0]) {
        Monotonicity::Decreasing
    } else {
        Monotonicity::NonMonotone
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub ts: Vec<f64>,
    /// Verdict for each consecutive pair `(t_i, t_{i+1})`.
    pub verdicts: Vec<OrderingVerdict>,
    /// Direction of `sign · h` on the grid.
    pub tilt_direction: Monotonicity,
    /// Relation every pair should have, given the tilt direction.
    pub expected: Option<Relation>,
    pub consistent: bool,
    /// `t` of the member that dominates all others, and of the one dominated by all.
    pub upper_bound_t: Option<f64>,
    pub lower_bound_t: Option<f64>,
}

/// Orders consecutive members `π'_{t_i}`, `π'_{t_{i+1}}` of a univariate class.
pub fn class_order_chain(class: &PriorClass, ts: &[f64], grid: &GridSpec, tol: f64) -> Result<ChainReport> {
    if class.base().dim() != 1 {
        return Err(Error::NotUnivariate { dim: class.base().dim() });
    }
    if class.tilt().dim() != 1 {
        return Err(Error::NotUnivariate { dim: class.tilt().dim() });
    }
    if ts.len() < 2 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("ts must be strictly increasing with at least two entries".into()));
    }
    let members = ts.iter().map(|t| class.make_member(&[*t])).collect::<Result<Vec<_>>>()?;
    let verdicts = members
        .par_windows(2)
        .map(|w| lr_order(&w[0], &w[1], grid, tol))
        .collect::<Result<Vec<_>>>()?;

    let sign = class.kind().sign();
    let h: Vec<f64> = univariate_grid(grid)?
        .iter()
        .filter(|x| class.base().log_pdf(&[**x]).is_finite())
        .map(|x| sign * class.tilt().eval(&[*x])[0])
        .collect();
    let tilt_direction = monotonicity(&h);
    let expected = match tilt_direction {
        Monotonicity::Increasing => Some(Relation::LeqLr),
        Monotonicity::Decreasing => Some(Relation::GeqLr),
        Monotonicity::NonMonotone => None,
    };
    let consistent = expected.is_none_or(|e| verdicts.iter().all(|v| v.relation == e));
    let eps = class.epsilon().map(|e| e[0]);
    let (upper_bound_t, lower_bound_t) = match (expected, eps) {
        (Some(Relation::LeqLr), Some(e)) => (Some(e), Some(-e)),
        (Some(Relation::GeqLr), Some(e)) => (Some(-e), Some(e)),
        _ => (None, None),
    };
    Ok(ChainReport { ts: ts.to_vec(), verdicts, tilt_direction, expected, consistent, upper_bound_t, lower_bound_t })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mtp2Report {
    pub holds: bool,
    /// Largest `log π(θ) + log π(θ') − log π(θ∨θ') − log π(θ∧θ')` seen.
    pub worst_margin: f64,
    pub witness: Option<(Vec<f64>, Vec<f64>)>,
    pub pairs_checked: usize,
}

/// Checks `π(θ)π(θ') ≤ π(θ∨θ')π(θ∧θ')` on the given pairs, with `∨ = max`, `∧ = min`.
pub fn mtp2_check(d: &dyn Density, pairs: &[(Vec<f64>, Vec<f64>)], tol: f64) -> Result<Mtp2Report> {
    if d.dim() < 2 {
        return Err(Error::NotMultivariate);
    }
    let margins: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| {
            let join: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
            let meet: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
            d.log_pdf(a) + d.log_pdf(b) - d.log_pdf(&join) - d.log_pdf(&meet)
        })
        .collect();
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (i, m) in margins.iter().enumerate() {
        let m = if m.is_nan() { f64::INFINITY } else { *m };
        if m > worst.0 {
            worst = (m, i);
        }
    }
    let holds = worst.0 <= tol;
    Ok(Mtp2Report {
        holds,
        worst_margin: worst.0,
        witness: (!holds).then(|| pairs[worst.1].clone()),
        pairs_checked: pairs.len(),
    })
}

/// `count` pairs of independent draws from `d`.
pub fn random_pairs(d: &dyn Density, count: usize, seed: RngSeed) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut draws = draw_from(d, 2 * count, seed)?;
    let second = draws.split_off(count);
    Ok(draws.into_iter().zip(second).collect())
}

/// Tilt magnitudes used by [`tilt_band`], as multiples of ε.
pub const BAND_FRACTIONS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandTable {
    pub ts: [f64; 5],
    pub thetas: Vec<f64>,
    pub h: Vec<f64>,
    /// `exp(h(θ) t)` for each θ and each t.
    pub values: Vec<[f64; 5]>,
    /// First θ where the band is not monotone in t.
    pub violation: Option<f64>,
}

/// `exp(h(θ)·t)` for `t ∈ {−ε, −ε/2, 0, ε/2, ε}` with a pointwise monotonicity check in `t`.
pub fn tilt_band(h: &TiltFn, eps: f64, grid: &GridSpec) -> Result<BandTable> {
    if h.dim() != 1 {
        return Err(Error::NotUnivariate { dim: h.dim() });
    }
    let thetas = univariate_grid(grid)?;
    let ts = BAND_FRACTIONS.map(|f| f * eps);
    let hs: Vec<f64> = thetas.iter().map(|x| h.eval(&[*x])[0]).collect();
    let values: Vec<[f64; 5]> = hs.iter().map(|hv| ts.map(|t| (hv * t).exp())).collect();
    let violation = thetas.iter().zip(&hs).zip(&values).find_map(|((x, hv), row)| {
        let ok = if hv.is_nan() || row.iter().any(|v| v.is_nan()) {
            false
        } else if *hv > 0.0 {
            row.windows(2).all(|w| w[1] >= w[0])
        } else if *hv < 0.0 {
            row.windows(2).all(|w| w[1] <= w[0])
        } else {
            row.iter().all(|v| *v == 1.0)
        };
        (!ok).then_some(*x)
    });
    Ok(BandTable { ts, thetas, h: hs, values, violation })
}
