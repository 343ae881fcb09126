//! Run configuration: one JSON file, optionally overridden from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loghartree::analysis::Tolerances;
use loghartree::nehari::Thresholds;
use loghartree::solver::SolverConfig;
use loghartree::{GridSpec, SystemParams};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSize {
    Fixed(f64),
    Keyword(Auto),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

impl Default for BoxSize {
    fn default() -> Self {
        BoxSize::Keyword(Auto::Auto)
    }
}

impl std::str::FromStr for BoxSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(BoxSize::Keyword(Auto::Auto));
        }
        s.parse::<f64>()
            .map(BoxSize::Fixed)
            .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "L", default)]
    pub half_width: BoxSize,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    256
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: BoxSize::default(),
            n: default_n(),
        }
    }
}

impl GridConfig {
    pub fn resolve(&self, lambda_min: f64) -> Result<GridSpec> {
        let l = match self.half_width {
            BoxSize::Fixed(l) => l,
            BoxSize::Keyword(Auto::Auto) => GridSpec::auto_half_width(lambda_min),
        };
        GridSpec::new(l, self.n).with_context(|| "grid")
    }
}

/// `β` either as a value or as a multiple of `max(β₁, β₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Value(f64),
    Relative { factor: f64 },
}

impl BetaSpec {
    pub fn resolve(&self, thresholds: &Thresholds) -> f64 {
        match *self {
            BetaSpec::Value(b) => b,
            BetaSpec::Relative { factor } => factor * thresholds.max(),
        }
    }
}

/// Missing `lambda2`, `mu2` copy the first equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda1: f64,
    #[serde(default)]
    pub lambda2: Option<f64>,
    pub mu1: f64,
    #[serde(default)]
    pub mu2: Option<f64>,
    #[serde(default)]
    pub beta: Option<BetaSpec>,
}

impl ParamsConfig {
    /// Parameters with `β` set to `beta`, validated field by field.
    pub fn with_beta(&self, beta: f64) -> Result<SystemParams> {
        Ok(SystemParams::new(
            self.lambda1,
            self.lambda2.unwrap_or(self.lambda1),
            self.mu1,
            self.mu2.unwrap_or(self.mu1),
            beta,
        )?)
    }

    /// Parameters for the scalar problems, where `β` plays no role.
    pub fn uncoupled(&self) -> Result<SystemParams> {
        self.with_beta(1.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda1.min(self.lambda2.unwrap_or(self.lambda1))
    }

    pub fn validate(&self) -> Result<()> {
        self.uncoupled()?;
        match self.beta {
            Some(BetaSpec::Value(b)) if !(b.is_finite() && b > 0.0) => {
                bail!("invalid argument: beta must be positive and finite, got {b}")
            }
            Some(BetaSpec::Relative { factor }) if !(factor.is_finite() && factor > 0.0) => {
                bail!("invalid argument: beta.factor must be positive and finite, got {factor}")
            }
            _ => Ok(()),
        }
    }

    pub fn beta(&self) -> Result<BetaSpec> {
        self.beta.context("invalid argument: params.beta is required for this command")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub grid_n: Option<usize>,
    pub half_width: Option<BoxSize>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.output = out.clone();
        }
        if let Some(n) = o.grid_n {
            self.grid.n = n;
        }
        if let Some(l) = o.half_width {
            self.grid.half_width = l;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        self.spec()?;
        if let Some(s) = &self.sweep {
            if s.betas.is_empty() {
                bail!("invalid argument: sweep.betas is empty");
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<GridSpec> {
        self.grid.resolve(self.params.lambda_min())
    }

    /// The configuration with `L` resolved, as echoed into manifests.
    pub fn resolved(&self) -> Result<RunConfig> {
        let mut c = self.clone();
        c.grid.half_width = BoxSize::Fixed(self.spec()?.half_width());
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn auto_box_and_defaults() {
        let cfg = parse(r#"{"params": {"lambda1": 4, "mu1": 1}}"#).unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.n(), 256);
        assert_eq!(spec.half_width(), 6.0);
        assert_eq!(cfg.output, PathBuf::from("out"));
        let p = cfg.params.uncoupled().unwrap();
        assert_eq!((p.lambda2, p.mu2), (4.0, 1.0));
        let echoed = serde_json::to_value(cfg.resolved().unwrap()).unwrap();
        assert_eq!(echoed["grid"]["L"], 6.0);
    }

    #[test]
    fn explicit_box_and_relative_beta() {
        let cfg = parse(
            r#"{"grid": {"L": 10, "N": 64}, "params": {"lambda1": 1, "lambda2": 2, "mu1": 1, "mu2": 1, "beta": {"factor": 1.5}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.spec().unwrap().half_width(), 10.0);
        assert_eq!(cfg.params.beta, Some(BetaSpec::Relative { factor: 1.5 }));
        let auto: RunConfig = serde_json::from_str(r#"{"grid": {"L": "auto"}, "params": {"lambda1": 1, "mu1": 1}}"#).unwrap();
        assert_eq!(auto.grid.half_width, BoxSize::Keyword(Auto::Auto));
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = parse(r#"{"params": {"lambda1": 0, "mu1": 1}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("lambda1"));
        let err = parse(r#"{"params": {"lambda1": 1, "mu1": 1, "beta": -1}}"#).unwrap_err();
        assert!(format!("{err:#}").contains("beta"));
        assert!(parse(r#"{"params": {"lambda1": 1, "mu1": 1}, "grd": {}}"#).is_err());
        assert!(parse(r#"{"grid": {"N": 4}, "params": {"lambda1": 1, "mu1": 1}}"#).is_err());
    }

    #[test]
    fn overrides_take_precedence() {
        let mut cfg = parse(r#"{"grid": {"L": 5, "N": 32}, "params": {"lambda1": 1, "mu1": 1}}"#).unwrap();
        cfg.apply(&Overrides {
            out: Some("elsewhere".into()),
            grid_n: Some(64),
            half_width: Some("auto".parse().unwrap()),
        });
        assert_eq!(cfg.output, PathBuf::from("elsewhere"));
        assert_eq!(cfg.spec().unwrap().n(), 64);
        assert_eq!(cfg.spec().unwrap().half_width(), 12.0);
        assert!("x".parse::<BoxSize>().is_err());
    }
}
