//! Numerical checks of the prior/likelihood duality.
//!
//! Moving a data perturbation `t` onto the prior leaves the posterior kernel
//! unchanged up to a θ-free constant. The functions here evaluate the log of
//! the ratio between the two kernels on a set of parameter points; its spread
//! (max − min) is zero for conjugate shifts and `O(t²)` for derivative tilts.

use crate::classes::{conjugate_shift, ExpFamSpec, PriorClass, SuffStatModel};
use crate::error::{Error, Result};

/// `log[π_γ(θ) f(s⁰+t|θ)] − log[π_γ'(θ) f(s⁰|θ)]` with `γ' = (k, l + t)`.
pub fn conjugate_log_ratio(spec: &ExpFamSpec, s0: &[f64], t: &[f64], thetas: &[Vec<f64>]) -> Result<Vec<f64>> {
    if s0.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: s0.len(), got: t.len() });
    }
    let prior = spec.prior()?;
    let shifted = conjugate_shift(spec, t)?.prior()?;
    let s1: Vec<f64> = s0.iter().zip(t).map(|(a, b)| a + b).collect();
    Ok(thetas
        .iter()
        .map(|th| {
            prior.log_pdf(th) + spec.log_likelihood(&s1, th) - shifted.log_pdf(th) - spec.log_likelihood(s0, th)
        })
        .collect())
}

/// `log[π(θ) g(s⁰+t|θ)] − log[π'_t(θ) g(s⁰|θ)]` for a member of a derivative-tilt class.
pub fn tilted_log_ratio(
    class: &PriorClass,
    model: &dyn SuffStatModel,
    s0: &[f64],
    t: &[f64],
    thetas: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if s0.len() != t.len() {
        return Err(Error::DimensionMismatch { expected: s0.len(), got: t.len() });
    }
    let member = class.make_member(t)?;
    let base = class.base();
    let s1: Vec<f64> = s0.iter().zip(t).map(|(a, b)| a + b).collect();
    thetas
        .iter()
        .map(|th| {
            Ok(base.log_pdf(th) + model.log_g(&s1, th) - member.member_log_pdf(th, true)? - model.log_g(s0, th))
        })
        .collect()
}

/// `max − min` of the finite log-ratios; an error if any value is NaN or none is finite.
pub fn spread(values: &[f64]) -> Result<f64> {
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("log-ratio is NaN".into()));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::EmptyMass);
    }
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// `points` equispaced scalar parameter values on `[lo, hi]`.
pub fn scalar_points(lo: f64, hi: f64, points: usize) -> Vec<Vec<f64>> {
    let n = points.max(2);
    (0..n)
        .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::tilt_from_suffstat;
    use crate::density::{Density, Normal};
    use crate::models::{NormalKnownVar, PoissonGamma, StudentTLocation};
    use crate::numeric::DataVector;
    use std::sync::Arc;

    #[test]
    fn conjugate_ratio_is_flat_for_both_oracles() {
        let normal = NormalKnownVar::replication();
        let poisson = PoissonGamma::new(10, 2.0, 1.0, 30.0).unwrap();
        for t in [-1.0, -0.5, 0.5, 1.0] {
            let r = conjugate_log_ratio(&normal.expfam().unwrap(), &[9.975], &[t], &scalar_points(9.0, 11.0, 1001)).unwrap();
            assert!(spread(&r).unwrap() < 1e-10);
            let r = conjugate_log_ratio(&poisson.expfam().unwrap(), &[30.0], &[t], &scalar_points(0.5, 8.0, 1001)).unwrap();
            assert!(spread(&r).unwrap() < 1e-10);
        }
    }

    #[test]
    fn student_t_deviation_is_quadratic() {
        let model = StudentTLocation { nu: 3.0 };
        let x0 = DataVector::new(vec![0.5]).unwrap();
        let base: Arc<dyn Density> = Arc::new(Normal::new(0.0, 1.0).unwrap());
        let tilt = tilt_from_suffstat(Arc::new(model), &x0).unwrap();
        let class = PriorClass::abc(base, tilt, vec![0.1]).unwrap();
        let thetas = scalar_points(-4.0, 4.0, 1001);
        let dev: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|t| spread(&tilted_log_ratio(&class, &model, &[0.5], &[*t], &thetas).unwrap()).unwrap())
            .collect();
        for w in dev.windows(2) {
            let ratio = w[1] / w[0];
            assert!((3.5..=4.5).contains(&ratio), "{dev:?}");
        }
    }

    #[test]
    fn spread_rejects_nan() {
        assert!(spread(&[0.0, f64::NAN]).is_err());
        assert_eq!(spread(&[1.0, 3.0, f64::NEG_INFINITY]).unwrap(), 2.0);
    }
}
