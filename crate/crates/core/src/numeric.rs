//! Shared numeric plumbing: points, datasets, weighted particle sets,
//! log-space reductions and tensor trapezoid quadrature.
//!
//! Everything that touches densities stays in log space. Weights are only
//! exponentiated after subtracting their maximum, because the tilt factors
//! `exp(h(θ)·t)` overflow long before the normalized weights do.

use std::ops::Deref;

use crate::density::Density;
use crate::error::{Error, Result};

/// Largest parameter dimension handled by grid quadrature.
pub const MAX_QUADRATURE_DIM: usize = 3;

/// A point θ in the parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("parameter point needs at least one coordinate".into()));
        }
        if let Some(k) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("parameter coordinate {k} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamPoint {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// An observed or simulated dataset.
///
/// When only the sufficient statistic matters, a dataset may be represented by
/// the statistic itself (e.g. `[x̄]` for a Normal mean model).
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector(Vec<f64>);

impl DataVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one value".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("data value {i} is not finite")));
        }
        Ok(Self(values))
    }

    /// Used on simulator hot paths, where the generator guarantees finiteness.
    pub fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Value of a (possibly vector) sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStat(Vec<f64>);

impl SuffStat {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sufficient statistic needs at least one value".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("sufficient statistic {k} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Component-wise `self + shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.0.len() {
            return Err(Error::DimensionMismatch { expected: self.0.len(), got: shift.len() });
        }
        Self::new(self.0.iter().zip(shift).map(|(s, t)| s + t).collect())
    }
}

/// A particle set `{(θ_i, ω_i)}` carried with log-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub points: Vec<ParamPoint>,
    pub log_weights: Vec<f64>,
    pub normalized: bool,
    pub seed: u64,
}

impl WeightedSample {
    pub fn new(points: Vec<ParamPoint>, log_weights: Vec<f64>, seed: u64) -> Result<Self> {
        if points.len() != log_weights.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: log_weights.len() });
        }
        Ok(Self { points, log_weights, normalized: false, seed })
    }

    /// An equally weighted sample (already normalized).
    pub fn uniform(points: Vec<ParamPoint>, seed: u64) -> Self {
        let lw = -(points.len() as f64).ln();
        let log_weights = vec![lw; points.len()];
        Self { points, log_weights, normalized: true, seed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// Normalized weights in linear space.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let lse = log_sum_exp(&self.log_weights)?;
        Ok(self.log_weights.iter().map(|lw| (lw - lse).exp()).collect())
    }

    /// Coordinate `k` of every particle.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[k]).collect()
    }

    /// Self-normalized estimate of `E[f(θ)]`.
    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let w = self.weights()?;
        Ok(self.points.iter().zip(&w).map(|(p, wi)| wi * f(p)).sum())
    }

    pub fn mean(&self, k: usize) -> Result<f64> {
        self.expectation(|p| p[k])
    }

    pub fn variance(&self, k: usize) -> Result<f64> {
        let mu = self.mean(k)?;
        self.expectation(|p| (p[k] - mu).powi(2))
    }

    /// Delta-method standard error of the self-normalized mean of coordinate `k`:
    /// `sqrt(Σ w_i² (θ_i − μ̂)²)`.
    pub fn mean_standard_error(&self, k: usize) -> Result<f64> {
        let w = self.weights()?;
        let mu: f64 = self.points.iter().zip(&w).map(|(p, wi)| wi * p[k]).sum();
        let v: f64 = self
            .points
            .iter()
            .zip(&w)
            .map(|(p, wi)| wi * wi * (p[k] - mu).powi(2))
            .sum();
        Ok(v.sqrt())
    }

    pub fn normalize(&self) -> Result<Self> {
        normalize(self)
    }

    pub fn ess(&self) -> Result<f64> {
        ess(self)
    }
}

/// Stable `log Σ exp(v_i)`.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let max = values
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyMass);
    }
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let sum: f64 = values
        .iter()
        .filter(|v| !v.is_nan())
        .map(|v| (v - max).exp())
        .sum();
    Ok(max + sum.ln())
}

/// Rescales log-weights so the linear weights sum to one.
pub fn normalize(sample: &WeightedSample) -> Result<WeightedSample> {
    if sample.log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(Error::InvalidArgument("log-weights must be finite or -inf".into()));
    }
    let lse = log_sum_exp(&sample.log_weights)?;
    let log_weights = sample.log_weights.iter().map(|w| w - lse).collect();
    Ok(WeightedSample {
        points: sample.points.clone(),
        log_weights,
        normalized: true,
        seed: sample.seed,
    })
}

/// Effective sample size `1 / Σ w_i²` of a normalized sample.
pub fn ess(sample: &WeightedSample) -> Result<f64> {
    if !sample.normalized {
        return Err(Error::NotNormalized);
    }
    let lse = log_sum_exp(&sample.log_weights)?;
    let sum_sq: f64 = sample.log_weights.iter().map(|w| (2.0 * (w - lse)).exp()).sum();
    let n = sample.len() as f64;
    Ok((1.0 / sum_sq).clamp(1.0, n))
}

/// One axis of a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.upper } else { self.lower + i as f64 * h })
            .collect()
    }

    /// Trapezoid weights for this axis.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| if i == 0 || i + 1 == self.points { 0.5 * h } else { h })
            .collect()
    }
}

/// A hyper-rectangular evaluation grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for (d, a) in axes.iter().enumerate() {
            if !(a.lower.is_finite() && a.upper.is_finite() && a.lower < a.upper) {
                return Err(Error::InvalidArgument(format!(
                    "grid axis {d}: need finite lower < upper (got {} .. {})",
                    a.lower, a.upper
                )));
            }
            if a.points < 2 {
                return Err(Error::InvalidArgument(format!("grid axis {d}: need at least 2 points")));
            }
        }
        Ok(Self { axes })
    }

    pub fn univariate(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(vec![Axis { lower, upper, points }])
    }

    /// Same `points` on every axis of the given bounds.
    pub fn from_bounds(bounds: &[(f64, f64)], points: usize) -> Result<Self> {
        Self::new(bounds.iter().map(|&(lower, upper)| Axis { lower, upper, points }).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid with every axis spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            axes: self
                .axes
                .iter()
                .map(|a| Axis { points: 2 * a.points - 1, ..*a })
                .collect(),
        }
    }

    /// All tensor nodes (row-major, last axis fastest) with their trapezoid weights.
    pub fn weighted_nodes(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        if self.dim() > MAX_QUADRATURE_DIM {
            return Err(Error::DimensionTooHigh { dim: self.dim() });
        }
        let nodes: Vec<Vec<f64>> = self.axes.iter().map(Axis::nodes).collect();
        let weights: Vec<Vec<f64>> = self.axes.iter().map(Axis::trapezoid_weights).collect();
        let total = self.len();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; self.dim()];
        for _ in 0..total {
            let point = idx.iter().enumerate().map(|(d, &i)| nodes[d][i]).collect();
            let w = idx.iter().enumerate().map(|(d, &i)| weights[d][i]).product();
            out.push((point, w));
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.axes[d].points {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(out)
    }
}

/// Trapezoid estimate of `∫ integrand(θ)·exp(log_pdf(θ)) dθ` over the grid.
pub fn quadrature_expectation(
    density: &dyn Density,
    integrand: &dyn Fn(&[f64]) -> f64,
    grid: &GridSpec,
) -> Result<f64> {
    if grid.dim() != density.dim() {
        return Err(Error::DimensionMismatch { expected: density.dim(), got: grid.dim() });
    }
    let mut total = 0.0;
    for (theta, w) in grid.weighted_nodes()? {
        let lp = density.log_pdf(&theta);
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let f = integrand(&theta);
        if !f.is_finite() || lp.is_nan() {
            return Err(Error::InvalidArgument(format!("integrand or density not finite at {theta:?}")));
        }
        total += w * f * lp.exp();
    }
    Ok(total)
}

/// Trapezoid estimate of `log ∫ exp(log_f(θ)) dθ`, accumulated in log space.
pub fn log_quadrature(log_f: &dyn Fn(&[f64]) -> f64, grid: &GridSpec) -> Result<f64> {
    let terms: Vec<f64> = grid
        .weighted_nodes()?
        .into_iter()
        .map(|(theta, w)| log_f(&theta) + w.ln())
        .collect();
    if terms.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidArgument("log-integrand is NaN on the grid".into()));
    }
    log_sum_exp(&terms)
}

/// Running trapezoid integral of `ys` over the abscissae `xs`, starting at 0.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(xs.len());
    out.push(0.0);
    for i in 1..xs.len() {
        acc += 0.5 * (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]);
        out.push(acc);
    }
    out
}

/// Running integral of `ys` on equispaced `xs` by local cubic interpolation
/// (one-sided on the end intervals); exact for cubics. Falls back
/// to [`cumulative_trapezoid`] on uneven or very short grids.
pub fn cumulative_cubic(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 4 {
        return cumulative_trapezoid(xs, ys);
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    if xs.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs()) {
        return cumulative_trapezoid(xs, ys);
    }
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    for i in 0..n - 1 {
        acc += if i == 0 {
            h / 24.0 * (9.0 * ys[0] + 19.0 * ys[1] - 5.0 * ys[2] + ys[3])
        } else if i == n - 2 {
            h / 24.0 * (ys[n - 4] - 5.0 * ys[n - 3] + 19.0 * ys[n - 2] + 9.0 * ys[n - 1])
        } else {
            h / 24.0 * (-ys[i - 1] + 13.0 * ys[i] + 13.0 * ys[i + 1] - ys[i + 2])
        };
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Normal;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_with(log_weights: Vec<f64>) -> WeightedSample {
        let points = (0..log_weights.len()).map(|i| ParamPoint::scalar(i as f64)).collect();
        WeightedSample::new(points, log_weights, 0).unwrap()
    }

    #[test]
    fn log_sum_exp_examples() {
        assert_abs_diff_eq!(log_sum_exp(&[0.0, 0.0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 0.0]).unwrap(), 0.0);
        // Exact reference computed at small offset.
        let small = log_sum_exp(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(log_sum_exp(&[1000.0, 1000.0]).unwrap(), 1000.0 + small, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), Err(Error::EmptyMass));
    }

    #[test]
    fn normalize_examples() {
        let w = normalize(&sample_with(vec![0.0; 4])).unwrap().weights().unwrap();
        for wi in w {
            assert_abs_diff_eq!(wi, 0.25, epsilon = 1e-12);
        }
        let w = normalize(&sample_with(vec![0.0, 3f64.ln()])).unwrap().weights().unwrap();
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.75, epsilon = 1e-12);
        let w = normalize(&sample_with(vec![-1000.0, -1000.0 + 2f64.ln()]))
            .unwrap()
            .weights()
            .unwrap();
        assert_abs_diff_eq!(w[0], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 2.0 / 3.0, epsilon = 1e-12);
        assert!(normalize(&sample_with(vec![f64::NEG_INFINITY; 2])).is_err());
    }

    #[test]
    fn ess_examples() {
        let s = normalize(&sample_with(vec![0.0; 100])).unwrap();
        assert_abs_diff_eq!(ess(&s).unwrap(), 100.0, epsilon = 1e-9);
        let s = normalize(&sample_with(vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY])).unwrap();
        assert_abs_diff_eq!(ess(&s).unwrap(), 1.0, epsilon = 1e-12);
        let s = normalize(&sample_with(vec![0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()])).unwrap();
        assert_abs_diff_eq!(ess(&s).unwrap(), 1.0 / 0.375, epsilon = 1e-12);
        assert_eq!(ess(&sample_with(vec![0.0, 0.0])), Err(Error::NotNormalized));
    }

    #[test]
    fn quadrature_examples() {
        let grid = GridSpec::univariate(-10.0, 10.0, 2001).unwrap();
        let std = Normal::new(0.0, 1.0).unwrap();
        let mass = quadrature_expectation(&std, &|_| 1.0, &grid).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-6);
        let var = quadrature_expectation(&std, &|t| t[0] * t[0], &grid).unwrap();
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-5);

        // Gaussian moment generating function of N(10, 0.02) at 50·0.1 = 5.
        let prior = Normal::new(10.0, 0.02f64.sqrt()).unwrap();
        let grid = GridSpec::univariate(10.0 - 12.0 * 0.02f64.sqrt(), 10.0 + 12.0 * 0.02f64.sqrt(), 4001).unwrap();
        let mgf = quadrature_expectation(&prior, &|t| (50.0 * (t[0] - 9.975) * 0.1).exp(), &grid).unwrap();
        let closed = (0.1 * 50.0 * (10.0 - 9.975) + 0.5 * (0.1f64 * 50.0).powi(2) * 0.02).exp();
        assert_abs_diff_eq!(closed, 1.4550, epsilon = 1e-4);
        assert_abs_diff_eq!(mgf, closed, epsilon = 1e-9);
    }

    #[test]
    fn quadrature_rejects_four_dimensions() {
        let grid = GridSpec::from_bounds(&[(0.0, 1.0); 4], 3).unwrap();
        assert_eq!(grid.weighted_nodes().unwrap_err(), Error::DimensionTooHigh { dim: 4 });
    }

    #[test]
    fn refining_the_grid_reduces_error() {
        let std = Normal::new(0.0, 1.0).unwrap();
        let mut grid = GridSpec::univariate(-10.0, 10.0, 9).unwrap();
        let cases: [(&dyn Fn(&[f64]) -> f64, f64); 2] = [(&|_| 1.0, 1.0), (&|t| t[0] * t[0], 1.0)];
        let mut last = [f64::INFINITY; 2];
        for _ in 0..3 {
            for (c, (f, exact)) in cases.iter().enumerate() {
                let err = (quadrature_expectation(&std, *f, &grid).unwrap() - exact).abs();
                assert!(err < last[c], "refinement did not reduce error: {err} vs {}", last[c]);
                last[c] = err;
            }
            grid = grid.refined();
        }
    }

    #[test]
    fn two_dimensional_tensor_trapezoid() {
        let grid = GridSpec::from_bounds(&[(0.0, 1.0), (0.0, 2.0)], 101).unwrap();
        let area = log_quadrature(&|_| 0.0, &grid).unwrap().exp();
        assert_abs_diff_eq!(area, 2.0, epsilon = 1e-12);
        let xy = log_quadrature(&|t| (t[0] * t[1]).max(1e-300).ln(), &grid).unwrap().exp();
        assert_abs_diff_eq!(xy, 1.0, epsilon = 1e-3);
    }

    proptest! {
        #[test]
        fn lse_is_shift_equivariant_and_permutation_invariant(
            v in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in -500.0f64..500.0,
        ) {
            let base = log_sum_exp(&v).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert!((log_sum_exp(&shifted).unwrap() - (base + c)).abs() < 1e-12 * (1.0 + c.abs()));
            let mut rev = v.clone();
            rev.reverse();
            prop_assert!((log_sum_exp(&rev).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn normalize_is_idempotent_and_shift_invariant(
            v in prop::collection::vec(-30.0f64..30.0, 1..30),
            c in -100.0f64..100.0,
        ) {
            let once = normalize(&sample_with(v.clone())).unwrap();
            let twice = normalize(&once).unwrap();
            let shifted = normalize(&sample_with(v.iter().map(|x| x + c).collect())).unwrap();
            let (w1, w2, w3) = (once.weights().unwrap(), twice.weights().unwrap(), shifted.weights().unwrap());
            prop_assert!((w1.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..w1.len() {
                prop_assert!((w1[i] - w2[i]).abs() < 1e-12);
                prop_assert!((w1[i] - w3[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn ess_lies_in_range(v in prop::collection::vec(-20.0f64..20.0, 1..50)) {
            let s = normalize(&sample_with(v.clone())).unwrap();
            let e = ess(&s).unwrap();
            prop_assert!(e >= 1.0 && e <= v.len() as f64 + 1e-9);
            let all_equal = v.iter().all(|x| *x == v[0]);
            prop_assert_eq!(all_equal, (e - v.len() as f64).abs() < 1e-9 * v.len() as f64);
        }
    }

    #[test]
    fn cumulative_cubic_is_exact_for_cubics() {
        let xs: Vec<f64> = (0..11).map(|i| -1.0 + 0.3 * f64::from(i)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * x - x * x + 0.5).collect();
        let got = cumulative_cubic(&xs, &ys);
        let prim = |x: f64| 0.5 * x.powi(4) - x.powi(3) / 3.0 + 0.5 * x;
        for (x, g) in xs.iter().zip(&got) {
            assert_abs_diff_eq!(*g, prim(*x) - prim(xs[0]), epsilon = 1e-12);
        }
    }

    #[test]
    fn cumulative_cubic_beats_trapezoid_on_normal_cdf() {
        let xs: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * f64::from(i)).collect();
        let d = Normal::new(0.0, 1.0).unwrap();
        let ys: Vec<f64> = xs.iter().map(|x| d.ln_pdf(*x).exp()).collect();
        let err = |cdf: Vec<f64>| xs.iter().zip(&cdf).map(|(x, c)| (c - d.cdf(*x)).abs()).fold(0.0, f64::max);
        let (cubic, trap) = (err(cumulative_cubic(&xs, &ys)), err(cumulative_trapezoid(&xs, &ys)));
        assert!(cubic < 1e-6 && cubic < trap / 100.0, "{cubic} vs {trap}");
    }
}
