//! Experiment configuration: a TOML document, overridden by `--set key=value`
//! flags and the global `--seed` / `--out` / `--threads` flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tiltprior::samplers::Pooling;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "TILTPRIOR_OUT";
const DEFAULT_OUT: &str = "tiltprior-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Normal,
    Poisson,
    PoissonRegression,
    /// Standard normal prior with the bounded tilt `h(θ) = Φ(10θ)`.
    BoundedTilt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub epsilon: Option<f64>,
    pub kappa: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub normal: NormalParams,
    pub poisson: PoissonParams,
    pub regression: RegressionParams,
    pub sampler: SamplerParams,
    pub grid: GridParams,
    pub bands: BandParams,
    pub classes: ClassesParams,
    pub diagnostics: DiagnosticsParams,
    pub elicit: ElicitParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Normal,
            epsilon: None,
            kappa: None,
            seed: 1,
            out: None,
            normal: NormalParams::default(),
            poisson: PoissonParams::default(),
            regression: RegressionParams::default(),
            sampler: SamplerParams::default(),
            grid: GridParams::default(),
            bands: BandParams::default(),
            classes: ClassesParams::default(),
            diagnostics: DiagnosticsParams::default(),
            elicit: ElicitParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct NormalParams {
    pub n: f64,
    pub sigma2: f64,
    pub m: f64,
    pub s2: f64,
    pub xbar0: f64,
}

impl Default for NormalParams {
    fn default() -> Self {
        Self { n: 100.0, sigma2: 2.0, m: 10.0, s2: 0.02, xbar0: 9.975 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PoissonParams {
    pub n: usize,
    pub r: f64,
    pub v: f64,
    pub sum_x0: f64,
}

impl Default for PoissonParams {
    fn default() -> Self {
        Self { n: 10, r: 2.0, v: 1.0, sum_x0: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RegressionParams {
    /// CSV with columns `x1..xp, y`; the bundled synthetic data when absent.
    pub data: Option<PathBuf>,
    /// Members sampled for the robustness range.
    pub members: usize,
    /// Prior draws reweighted for every member.
    pub particles: usize,
}

impl Default for RegressionParams {
    fn default() -> Self {
        Self { data: None, members: 200, particles: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SamplerParams {
    /// Draws per posterior.
    pub n: usize,
    /// Tilt values drawn by the pooled sampler.
    pub n_t: usize,
    /// Particles per tilt value.
    pub m: usize,
    pub pooling: Pooling,
    pub max_attempts: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self { n: 20_000, n_t: 100_000, m: 1, pooling: Pooling::Evidence, max_attempts: 500_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridParams {
    /// Points of univariate grids.
    pub points: usize,
    /// Points per axis of bivariate grids.
    pub points_2d: usize,
    /// Explicit univariate range; otherwise a range covering every density involved.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { points: 4001, points_2d: 201, lower: None, upper: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BandParams {
    /// Any of `increasing`, `decreasing`, `non-monotone`, `corrupted`.
    pub presets: Vec<String>,
    pub epsilons: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl Default for BandParams {
    fn default() -> Self {
        Self {
            presets: vec!["increasing".into(), "decreasing".into(), "non-monotone".into()],
            epsilons: vec![1.8, 3.0],
            lower: -3.0,
            upper: 3.0,
            points: 601,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ClassesParams {
    /// Internal member as a fraction of ε.
    pub internal_fraction: f64,
}

impl Default for ClassesParams {
    fn default() -> Self {
        Self { internal_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiagnosticsParams {
    /// Chain members as fractions of ε.
    pub fractions: Vec<f64>,
    pub tol: f64,
    pub mtp2_pairs: usize,
    /// Correlations of the bivariate normal MTP2 fixtures.
    pub rhos: Vec<f64>,
    /// Random members drawn for the nesting check.
    pub nesting_draws: usize,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        Self {
            fractions: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            tol: 1e-9,
            mtp2_pairs: 1000,
            rhos: vec![0.5, -0.8],
            nesting_draws: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ElicitParams {
    /// Bisection tolerance on `t`.
    pub tol: f64,
}

impl Default for ElicitParams {
    fn default() -> Self {
        Self { tol: 1e-6 }
    }
}

/// How ε is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Epsilon(f64),
    Kappa(f64),
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut doc = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: Self = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Exactly one of `epsilon` and `kappa`.
    pub fn bound(&self) -> CliResult<Bound> {
        match (self.epsilon, self.kappa) {
            (Some(e), None) => {
                if e.is_finite() && e >= 0.0 {
                    Ok(Bound::Epsilon(e))
                } else {
                    Err(CliError::Config(format!("epsilon must be finite and >= 0 (got {e})")))
                }
            }
            (None, Some(k)) => {
                if k > 0.0 && k < 1.0 {
                    Ok(Bound::Kappa(k))
                } else {
                    Err(CliError::Config(format!("kappa must lie in (0, 1) (got {k})")))
                }
            }
            (Some(_), Some(_)) => Err(CliError::Config("set only one of epsilon and kappa".into())),
            (None, None) => Err(CliError::Config("set one of epsilon or kappa".into())),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.bound()?;
        let sizes = [
            ("sampler.n", self.sampler.n),
            ("sampler.n-t", self.sampler.n_t),
            ("sampler.m", self.sampler.m),
            ("grid.points", self.grid.points),
            ("grid.points-2d", self.grid.points_2d),
            ("bands.points", self.bands.points),
            ("diagnostics.mtp2-pairs", self.diagnostics.mtp2_pairs),
            ("regression.members", self.regression.members),
            ("regression.particles", self.regression.particles),
        ];
        for (name, v) in sizes {
            if v < 1 {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.grid.points < 3 || self.grid.points_2d < 3 || self.bands.points < 2 {
            return Err(CliError::Config("grids need at least 3 points".into()));
        }
        if self.sampler.max_attempts < self.sampler.n as u64 {
            return Err(CliError::Config("sampler.max-attempts must be at least sampler.n".into()));
        }
        match (self.grid.lower, self.grid.upper) {
            (Some(lo), Some(hi)) if !(lo < hi) => {
                return Err(CliError::Config("grid.lower must be below grid.upper".into()));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(CliError::Config("set both grid.lower and grid.upper or neither".into()));
            }
            _ => {}
        }
        if !(self.bands.lower < self.bands.upper) {
            return Err(CliError::Config("bands.lower must be below bands.upper".into()));
        }
        if !(self.elicit.tol > 0.0) {
            return Err(CliError::Config("elicit.tol must be > 0".into()));
        }
        Ok(())
    }

    /// `--out`, then the config file, then the environment, then the default.
    pub fn output_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Sets a dotted `key=value` in the document; the value is parsed as TOML
/// and taken as a plain string when that fails.
fn apply_override(doc: &mut toml::Table, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{item}` is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override `{key}`: `{part}` is not a table")))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
