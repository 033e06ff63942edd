//! Builds models, classes and grids from a configuration.

use std::sync::Arc;

use tiltprior::density::{std_normal_cdf, Independent, Normal};
use tiltprior::kolmogorov::{
    covering_grid, default_bracket_top, elicit_epsilon, elicit_epsilon_per_coordinate, elicitation_grid, Elicitation,
};
use tiltprior::models::{load_csv, NormalKnownVar, PoissonGamma, PoissonRegression};
use tiltprior::{tilt_from_suffstat, Density, GridSpec, PriorClass, TiltFn, TiltProvenance};

use crate::config::{Bound, ExperimentConfig, ModelKind};
use crate::error::{CliError, CliResult};

pub fn normal(cfg: &ExperimentConfig) -> CliResult<NormalKnownVar> {
    let p = &cfg.normal;
    Ok(NormalKnownVar::new(p.n, p.sigma2, p.m, p.s2, p.xbar0)?)
}

pub fn poisson(cfg: &ExperimentConfig) -> CliResult<PoissonGamma> {
    let p = &cfg.poisson;
    Ok(PoissonGamma::new(p.n, p.r, p.v, p.sum_x0)?)
}

/// The regression model with the same bound on every observation.
pub fn regression(cfg: &ExperimentConfig, eps: f64) -> CliResult<PoissonRegression> {
    Ok(match &cfg.regression.data {
        Some(path) => {
            let (design, counts) = load_csv(path)?;
            let p = design.first().map_or(0, Vec::len);
            let prior: Arc<dyn Density> = Arc::new(Independent::standard_normal(p)?);
            let n = counts.len();
            PoissonRegression::new(design, counts, prior, vec![eps; n])?
        }
        None => PoissonRegression::bundled(eps)?,
    })
}

/// Base prior and scalar tilt of a univariate model.
pub fn base_and_tilt(cfg: &ExperimentConfig) -> CliResult<(Arc<dyn Density>, TiltFn)> {
    match cfg.model {
        ModelKind::Normal => {
            let m = normal(cfg)?;
            Ok((Arc::new(m.prior()?), tilt_from_suffstat(m.suffstat_model(), &m.x0())?))
        }
        ModelKind::Poisson => {
            let m = poisson(cfg)?;
            Ok((Arc::new(m.prior()?), tilt_from_suffstat(m.suffstat_model(), &m.x0())?))
        }
        ModelKind::BoundedTilt => Ok((
            Arc::new(Normal::new(0.0, 1.0)?),
            TiltFn::scalar(TiltProvenance::LikelihoodGeneral, |th| std_normal_cdf(10.0 * th[0])),
        )),
        ModelKind::PoissonRegression => Err(CliError::Config("this command needs a univariate model".into())),
    }
}

/// Derivative-tilt class of a univariate model.
pub fn abc_class(cfg: &ExperimentConfig, eps: f64) -> CliResult<PriorClass> {
    let (base, tilt) = base_and_tilt(cfg)?;
    Ok(PriorClass::abc(base, tilt, vec![eps])?)
}

/// Conjugate-shift class, for the exponential-family models.
pub fn abc_e_class(cfg: &ExperimentConfig, eps: f64) -> CliResult<PriorClass> {
    match cfg.model {
        ModelKind::Normal => Ok(normal(cfg)?.normal_class_e(eps)?),
        ModelKind::Poisson => Ok(poisson(cfg)?.poisson_class_e(eps)?),
        _ => Err(CliError::Config("the conjugate class needs the normal or poisson model".into())),
    }
}

/// Configured univariate range, or one covering `densities`.
pub fn univariate_grid(cfg: &ExperimentConfig, densities: &[&dyn Density]) -> CliResult<GridSpec> {
    match (cfg.grid.lower, cfg.grid.upper) {
        (Some(lo), Some(hi)) => Ok(GridSpec::univariate(lo, hi, cfg.grid.points)?),
        _ => Ok(covering_grid(densities, cfg.grid.points)?),
    }
}

/// Base, tilt and grid used to elicit ε for a univariate model.
pub fn elicitation_inputs(cfg: &ExperimentConfig) -> CliResult<(Arc<dyn Density>, TiltFn, GridSpec)> {
    let (base, tilt) = base_and_tilt(cfg)?;
    let grid = match (cfg.grid.lower, cfg.grid.upper) {
        (Some(lo), Some(hi)) => GridSpec::univariate(lo, hi, cfg.grid.points)?,
        _ => {
            let top = default_bracket_top(&base, &tilt)?;
            elicitation_grid(&base, std::slice::from_ref(&tilt), top, cfg.grid.points)?
        }
    };
    Ok((base, tilt, grid))
}

/// Elicitation for a univariate model.
pub fn elicit_univariate(cfg: &ExperimentConfig, kappa: f64) -> CliResult<Elicitation> {
    let (base, tilt, grid) = elicitation_inputs(cfg)?;
    Ok(elicit_epsilon(base, &tilt, kappa, &grid, cfg.elicit.tol)?)
}

/// Per-observation elicitation for the regression model.
pub fn elicit_regression(cfg: &ExperimentConfig, kappa: f64) -> CliResult<Vec<Elicitation>> {
    let model = regression(cfg, 1.0)?;
    let tilts = model.observation_tilts();
    let top = tilts
        .iter()
        .map(|h| default_bracket_top(model.prior(), h))
        .collect::<tiltprior::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let grid = elicitation_grid(model.prior(), &tilts, top, cfg.grid.points_2d)?;
    Ok(elicit_epsilon_per_coordinate(Arc::clone(model.prior()), &tilts, kappa, &grid, cfg.elicit.tol)?)
}

/// ε for a univariate command, eliciting it first when κ is given.
pub fn epsilon(cfg: &ExperimentConfig) -> CliResult<(f64, Option<Elicitation>)> {
    match cfg.bound()? {
        Bound::Epsilon(e) => Ok((e, None)),
        Bound::Kappa(k) => {
            let e = elicit_univariate(cfg, k)?;
            Ok((e.t_star, Some(e)))
        }
    }
}
