//! Kolmogorov distance between a base prior and its tilted members, and the
//! inverse problem: the largest tilt whose member stays within a distance bound.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::classes::{NormalizerConfig, PriorClass, TiltFn, TiltedPrior};
use crate::density::{grid_pdf, Density};
use crate::error::{Error, Result};
use crate::numeric::{cumulative_cubic, GridSpec, MAX_QUADRATURE_DIM};
use crate::ordering::{check_grid_mass, univariate_grid};

/// Times the bisection bracket may be doubled before giving up.
const MAX_BRACKET_DOUBLINGS: usize = 8;
const MAX_BRACKET_HALVINGS: usize = 60;

/// Points at which `K(t)` is sampled to check monotonicity.
const MONOTONE_PROBES: usize = 12;

/// Slack allowed when checking that `K(t)` does not decrease.
const MONOTONE_SLACK: f64 = 1e-7;

fn pdf_values(d: &dyn Density, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| grid_pdf(d, &[*x])).collect()
}

/// CDF of a univariate density by cumulative trapezoid on the grid nodes.
pub fn cdf_on_grid(d: &dyn Density, grid: &GridSpec) -> Result<Vec<f64>> {
    if d.dim() != 1 {
        return Err(Error::NotUnivariate { dim: d.dim() });
    }
    let xs = univariate_grid(grid)?;
    Ok(cumulative_cubic(&xs, &pdf_values(d, &xs)))
}

/// `sup |F₁ − F₂|` over the nodes, refined by a parabola through the peak and its neighbours.
fn sup_gap(xs: &[f64], f1: &[f64], f2: &[f64]) -> f64 {
    let gap: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| (a - b).abs()).collect();
    let (i, &peak) = gap
        .iter()
        .enumerate()
        .fold((0, &0.0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
    let mut best = peak;
    if i > 0 && i + 1 < gap.len() {
        let (a, b, c) = (gap[i - 1], gap[i], gap[i + 1]);
        let denom = a - 2.0 * b + c;
        let h = xs[i + 1] - xs[i];
        if denom < 0.0 && (xs[i] - xs[i - 1] - h).abs() < 1e-9 * h.abs().max(1.0) {
            best = best.max(b - (a - c) * (a - c) / (8.0 * denom));
        }
    }
    best.clamp(0.0, 1.0)
}

/// `K(π, π') = sup_τ |F_π(τ) − F_π'(τ)|` on a univariate grid.
pub fn kolmogorov_distance(base: &dyn Density, member: &dyn Density, grid: &GridSpec) -> Result<f64> {
    for d in [base, member] {
        if d.dim() != 1 {
            return Err(Error::NotUnivariate { dim: d.dim() });
        }
    }
    let xs = univariate_grid(grid)?;
    let (p1, p2) = (pdf_values(base, &xs), pdf_values(member, &xs));
    check_grid_mass(&xs, &p1)?;
    check_grid_mass(&xs, &p2)?;
    Ok(sup_gap(&xs, &cumulative_cubic(&xs, &p1), &cumulative_cubic(&xs, &p2)))
}

/// Marginal CDF of coordinate `coord` of a density of dimension 2 or 3.
pub fn marginal_cdf(d: &dyn Density, grid: &GridSpec, coord: usize) -> Result<Vec<f64>> {
    let marginal = marginal_pdf(d, grid, coord)?;
    Ok(cumulative_cubic(&grid.axis(coord).nodes(), &marginal))
}

fn marginal_pdf(d: &dyn Density, grid: &GridSpec, coord: usize) -> Result<Vec<f64>> {
    if grid.dim() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: grid.dim() });
    }
    if coord >= grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: coord + 1 });
    }
    if grid.dim() > MAX_QUADRATURE_DIM {
        return Err(Error::DimensionTooHigh { dim: grid.dim() });
    }
    let axis = grid.axis(coord);
    let own_weights = axis.trapezoid_weights();
    let stride: usize = grid.axes()[coord + 1..].iter().map(|a| a.points).product();
    let nodes = grid.weighted_nodes()?;
    let values: Vec<f64> = nodes
        .par_iter()
        .map(|(theta, w)| w * grid_pdf(d, theta))
        .collect();
    let mut marginal = vec![0.0; axis.points];
    for (flat, v) in values.iter().enumerate() {
        marginal[(flat / stride) % axis.points] += v;
    }
    for (m, w) in marginal.iter_mut().zip(&own_weights) {
        *m /= w;
    }
    Ok(marginal)
}

/// Kolmogorov distance between the marginals of coordinate `coord`.
pub fn marginal_kolmogorov_distance(
    base: &dyn Density,
    member: &dyn Density,
    grid: &GridSpec,
    coord: usize,
) -> Result<f64> {
    let xs = grid.axis(coord).nodes();
    let (p1, p2) = (marginal_pdf(base, grid, coord)?, marginal_pdf(member, grid, coord)?);
    check_grid_mass(&xs, &p1)?;
    check_grid_mass(&xs, &p2)?;
    Ok(sup_gap(&xs, &cumulative_cubic(&xs, &p1), &cumulative_cubic(&xs, &p2)))
}

/// Smallest grid covering the effective bounds of every density.
pub fn covering_grid(densities: &[&dyn Density], points: usize) -> Result<GridSpec> {
    let mut bounds: Option<Vec<(f64, f64)>> = None;
    for d in densities {
        let b = d.effective_bounds()?;
        bounds = Some(match bounds {
            None => b,
            Some(acc) => {
                if acc.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: acc.len(), got: b.len() });
                }
                acc.iter().zip(&b).map(|(x, y)| (x.0.min(y.0), x.1.max(y.1))).collect()
            }
        });
    }
    let bounds = bounds.ok_or_else(|| Error::InvalidArgument("no densities to cover".into()))?;
    GridSpec::from_bounds(&bounds, points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCurve {
    pub ts: Vec<f64>,
    pub distances: Vec<f64>,
    pub grid: GridSpec,
}

/// `K(π, π'_t)` at `num_t` equispaced `t ∈ [−ε, ε]`, with `t = 0` always included.
pub fn distance_curve(class: &PriorClass, num_t: usize, grid: &GridSpec) -> Result<DistanceCurve> {
    if class.base().dim() != 1 || class.tilt().dim() != 1 {
        return Err(Error::NotUnivariate { dim: class.base().dim().max(class.tilt().dim()) });
    }
    if num_t < 2 {
        return Err(Error::InvalidArgument("num_t must be at least 2".into()));
    }
    let eps = class
        .epsilon()
        .ok_or_else(|| Error::InvalidArgument("class has no epsilon".into()))?[0];
    let mut ts: Vec<f64> = (0..num_t)
        .map(|i| -eps + 2.0 * eps * i as f64 / (num_t - 1) as f64)
        .collect();
    if let Some(mid) = ts.iter_mut().find(|t| t.abs() < 1e-12 * eps) {
        *mid = 0.0;
    } else {
        ts.push(0.0);
        ts.sort_by(f64::total_cmp);
    }
    let distances = ts
        .par_iter()
        .map(|t| {
            let member = class.make_member(&[*t])?;
            kolmogorov_distance(class.base().as_ref(), &member, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistanceCurve { ts, distances, grid: grid.clone() })
}

/// Result of inverting `K(t) ≤ κ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Elicitation {
    pub t_star: f64,
    /// `K(t*)`, the larger of the distances at `±t*`.
    pub distance: f64,
    /// Set when `K` stayed below `κ` on the whole (expanded) bracket.
    pub hit_bracket_top: bool,
    pub bracket_top: f64,
    /// `(t, K(t))` samples used for the monotonicity check.
    pub curve: Vec<(f64, f64)>,
    /// Coordinate of the binding marginal for multivariate bases.
    pub binding_marginal: Option<usize>,
}

/// Prior standard deviation of a scalar tilt, by quadrature over the base's effective box.
pub fn tilt_prior_sd(base: &dyn Density, tilt: &TiltFn) -> Result<f64> {
    if tilt.dim() != 1 {
        return Err(Error::NotUnivariate { dim: tilt.dim() });
    }
    let points = [4001usize, 201, 41][(base.dim().min(MAX_QUADRATURE_DIM)).max(1) - 1];
    if base.dim() > MAX_QUADRATURE_DIM {
        return Err(Error::DimensionTooHigh { dim: base.dim() });
    }
    let grid = GridSpec::from_bounds(&base.effective_bounds()?, points)?;
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (theta, w) in grid.weighted_nodes()? {
        let lp = base.log_pdf(&theta);
        if !lp.is_finite() {
            continue;
        }
        let h = tilt.eval(&theta)[0];
        if !h.is_finite() {
            continue;
        }
        let p = w * lp.exp();
        m0 += p;
        m1 += p * h;
        m2 += p * h * h;
    }
    let mean = m1 / m0;
    Ok((m2 / m0 - mean * mean).max(0.0).sqrt())
}

/// Default upper end of the bisection bracket: `10 / sd_π(h)`, halved until
/// the members at both ends can be normalized.
pub fn default_bracket_top(base: &Arc<dyn Density>, tilt: &TiltFn) -> Result<f64> {
    let sd = tilt_prior_sd(base.as_ref(), tilt)?;
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidArgument("tilt is constant under the base prior".into()));
    }
    let mut top = 10.0 / sd;
    for _ in 0..MAX_BRACKET_HALVINGS {
        if proper(base, tilt, top)? {
            return Ok(top);
        }
        top *= 0.5;
    }
    Err(Error::NonFiniteNormalizer { log_normalizer: f64::INFINITY, t_norm: top })
}

/// Whether the members at `±t` have finite normalizers.
fn proper(base: &Arc<dyn Density>, tilt: &TiltFn, t: f64) -> Result<bool> {
    for s in [-t, t] {
        match member(base, tilt, s, &NormalizerConfig::default())?.log_normalizer() {
            Ok(_) => {}
            Err(Error::NonFiniteNormalizer { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn check_kappa(kappa: f64, tol: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!("kappa must lie in (0, 1) (got {kappa})")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    Ok(())
}

fn bisect_distance(
    distance: impl Fn(f64) -> Result<(f64, Option<usize>)> + Sync,
    kappa: f64,
    tol: f64,
    initial_top: f64,
) -> Result<Elicitation> {
    let mut top = initial_top;
    let mut at_top = distance(top)?;
    let mut doublings = 0;
    while at_top.0 <= kappa && doublings < MAX_BRACKET_DOUBLINGS {
        // Members past `top` that cannot be normalized end the search.
        match distance(2.0 * top) {
            Ok(d) => at_top = d,
            Err(Error::NonFiniteNormalizer { .. }) => break,
            Err(e) => return Err(e),
        }
        top *= 2.0;
        doublings += 1;
    }

    let probes: Vec<f64> = (0..=MONOTONE_PROBES).map(|i| top * i as f64 / MONOTONE_PROBES as f64).collect();
    let curve: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|t| distance(*t).map(|(k, _)| (*t, k)))
        .collect::<Result<_>>()?;
    if let Some(w) = curve.windows(2).find(|w| w[1].1 < w[0].1 - MONOTONE_SLACK) {
        return Err(Error::NonMonotoneDistance { at: w[1].0, curve });
    }

    if at_top.0 <= kappa {
        return Ok(Elicitation {
            t_star: top,
            distance: at_top.0,
            hit_bracket_top: true,
            bracket_top: top,
            curve,
            binding_marginal: at_top.1,
        });
    }
    let (mut lo, mut hi) = (0.0, top);
    let mut at_lo = distance(0.0)?;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let at_mid = distance(mid)?;
        if at_mid.0 <= kappa {
            lo = mid;
            at_lo = at_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Elicitation {
        t_star: lo,
        distance: at_lo.0,
        hit_bracket_top: false,
        bracket_top: top,
        curve,
        binding_marginal: at_lo.1,
    })
}

fn member(base: &Arc<dyn Density>, tilt: &TiltFn, t: f64, config: &NormalizerConfig) -> Result<TiltedPrior> {
    TiltedPrior::new(Arc::clone(base), tilt.clone(), vec![t], 1.0, config.clone())
}

/// Largest `t ≥ 0` with `max(K(π, π'_{+t}), K(π, π'_{−t})) ≤ κ`, found by bisection to `tol`.
pub fn elicit_epsilon(
    base: Arc<dyn Density>,
    tilt: &TiltFn,
    kappa: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<Elicitation> {
    check_kappa(kappa, tol)?;
    if base.dim() != 1 || tilt.dim() != 1 {
        return Err(Error::NotUnivariate { dim: base.dim().max(tilt.dim()) });
    }
    let config = NormalizerConfig::default();
    let distance = |t: f64| -> Result<(f64, Option<usize>)> {
        if t == 0.0 {
            return Ok((0.0, None));
        }
        let up = kolmogorov_distance(base.as_ref(), &member(&base, tilt, t, &config)?, grid)?;
        let down = kolmogorov_distance(base.as_ref(), &member(&base, tilt, -t, &config)?, grid)?;
        Ok((up.max(down), None))
    };
    bisect_distance(distance, kappa, tol, default_bracket_top(&base, tilt)?)
}

/// Elicits one bound per scalar tilt for a multivariate base. Each distance is
/// the largest marginal Kolmogorov distance, so the binding marginal sets `ε_i`.
pub fn elicit_epsilon_per_coordinate(
    base: Arc<dyn Density>,
    tilts: &[TiltFn],
    kappa: f64,
    grid: &GridSpec,
    tol: f64,
) -> Result<Vec<Elicitation>> {
    check_kappa(kappa, tol)?;
    let dim = base.dim();
    if dim < 2 {
        return Err(Error::NotMultivariate);
    }
    let config = NormalizerConfig { points_per_axis: [8001, 201, 41], ..NormalizerConfig::default() };
    let base_cdfs = marginal_cdfs(base.as_ref(), grid)?;
    tilts
        .par_iter()
        .map(|tilt| {
            let distance = |t: f64| -> Result<(f64, Option<usize>)> {
                if t == 0.0 {
                    return Ok((0.0, Some(0)));
                }
                let mut worst = (0.0, 0usize);
                for s in [t, -t] {
                    let cdfs = marginal_cdfs(&member(&base, tilt, s, &config)?, grid)?;
                    for (j, (c, b)) in cdfs.iter().zip(&base_cdfs).enumerate() {
                        let k = sup_gap(&grid.axis(j).nodes(), b, c);
                        if k > worst.0 {
                            worst = (k, j);
                        }
                    }
                }
                Ok((worst.0, Some(worst.1)))
            };
            bisect_distance(distance, kappa, tol, default_bracket_top(&base, tilt)?)
        })
        .collect()
}

/// Every marginal CDF of `d` from a single pass over the grid, after the mass check.
fn marginal_cdfs(d: &dyn Density, grid: &GridSpec) -> Result<Vec<Vec<f64>>> {
    if grid.dim() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: grid.dim() });
    }
    if grid.dim() > MAX_QUADRATURE_DIM {
        return Err(Error::DimensionTooHigh { dim: grid.dim() });
    }
    let values: Vec<f64> = grid.weighted_nodes()?.par_iter().map(|(theta, w)| w * grid_pdf(d, theta)).collect();
    (0..grid.dim())
        .map(|j| {
            let axis = grid.axis(j);
            let stride: usize = grid.axes()[j + 1..].iter().map(|a| a.points).product();
            let mut marginal = vec![0.0; axis.points];
            for (flat, v) in values.iter().enumerate() {
                marginal[(flat / stride) % axis.points] += v;
            }
            for (m, w) in marginal.iter_mut().zip(axis.trapezoid_weights()) {
                *m /= w;
            }
            let xs = axis.nodes();
            check_grid_mass(&xs, &marginal)?;
            Ok(cumulative_cubic(&xs, &marginal))
        })
        .collect()
}

/// Grid wide enough for members tilted by up to `±t_max` along each scalar tilt.
pub fn elicitation_grid(base: &Arc<dyn Density>, tilts: &[TiltFn], t_max: f64, points: usize) -> Result<GridSpec> {
    let mut members = Vec::new();
    for tilt in tilts {
        for t in [-t_max, t_max] {
            members.push(member(base, tilt, t, &NormalizerConfig::default())?);
        }
    }
    let mut all: Vec<&dyn Density> = vec![base.as_ref()];
    all.extend(members.iter().map(|m| m as &dyn Density));
    covering_grid(&all, points)
}

/// Kolmogorov distance between the base and the single member of an AB class.
pub fn ab_discrepancy(class: &PriorClass, points: usize) -> Result<f64> {
    let member = class.make_member(&[1.0])?;
    let grid = covering_grid(&[class.base().as_ref(), &member], points)?;
    kolmogorov_distance(class.base().as_ref(), &member, &grid)
}
