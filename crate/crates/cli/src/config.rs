//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};
use std::str::FromStr;

use critlab::circle_maps::Family;
use critlab::contfrac::RotationNumber;
use critlab::Real;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const PRECISION_ENV: &str = "CRITLAB_PRECISION";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Rotation,
    Partition,
    Realbounds,
    Measure,
    Lyapunov,
    Unimodal,
    Acceptance,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Rotation => "rotation",
            ExperimentKind::Partition => "partition",
            ExperimentKind::Realbounds => "realbounds",
            ExperimentKind::Measure => "measure",
            ExperimentKind::Lyapunov => "lyapunov",
            ExperimentKind::Unimodal => "unimodal",
            ExperimentKind::Acceptance => "acceptance",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    Dd,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F64 => "f64",
            Precision::Dd => "dd",
        }
    }
}

impl FromStr for Precision {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f64" | "double" => Ok(Precision::F64),
            "dd" | "double-double" => Ok(Precision::Dd),
            other => Err(CliError::Config(format!("unknown precision mode {other:?} (expected f64 or dd)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Rigid,
    Arnold,
    Bicritical,
    Blaschke,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub family: FamilyName,
    /// Second critical point of the bicritical family.
    pub c2: Option<f64>,
    /// Fixed parameter. When absent the map is tuned to `theta`.
    pub omega: Option<f64>,
    /// Target width of the certified ρ-bracket when tuning.
    #[serde(default = "default_tune_tol")]
    pub tune_tol: f64,
}

fn default_tune_tol() -> f64 {
    1e-12
}

impl MapConfig {
    pub fn family(&self) -> Result<Family> {
        match (self.family, self.c2) {
            (FamilyName::Bicritical, Some(c2)) => Ok(Family::Bicritical { c2 }),
            (FamilyName::Bicritical, None) => Err(CliError::Config("bicritical family needs c2".into())),
            (_, Some(_)) => Err(CliError::Config("c2 is only valid for the bicritical family".into())),
            (FamilyName::Rigid, None) => Ok(Family::Rigid),
            (FamilyName::Arnold, None) => Ok(Family::Arnold),
            (FamilyName::Blaschke, None) => Ok(Family::Blaschke),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaKind {
    Golden,
    Silver,
    /// All partial quotients equal to `a`.
    Bounded,
    /// Periodic repetition of `quotients`.
    Quotients,
    /// Expansion of a decimal `value`.
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    #[serde(rename = "type")]
    pub kind: ThetaKind,
    #[serde(default = "default_depth")]
    pub depth: usize,
    pub a: Option<u64>,
    pub quotients: Option<Vec<u64>>,
    /// Decimal string, parsed at the working precision.
    pub value: Option<String>,
}

fn default_depth() -> usize {
    40
}

impl ThetaConfig {
    pub fn golden(depth: usize) -> Self {
        ThetaConfig {
            kind: ThetaKind::Golden,
            depth,
            a: None,
            quotients: None,
            value: None,
        }
    }

    pub fn build<T: Real + FromStr>(&self) -> Result<RotationNumber<T>> {
        let d = self.depth;
        if d < 2 {
            return Err(CliError::Config("theta depth must be at least 2".into()));
        }
        let stray = |field: &str, present: bool| {
            if present {
                Err(CliError::Config(format!("theta field {field} does not apply to type {:?}", self.kind)))
            } else {
                Ok(())
            }
        };
        match self.kind {
            ThetaKind::Golden | ThetaKind::Silver => {
                stray("a", self.a.is_some())?;
                stray("quotients", self.quotients.is_some())?;
                stray("value", self.value.is_some())?;
                Ok(if self.kind == ThetaKind::Golden {
                    RotationNumber::golden(d)
                } else {
                    RotationNumber::silver(d)
                })
            }
            ThetaKind::Bounded => {
                stray("quotients", self.quotients.is_some())?;
                stray("value", self.value.is_some())?;
                match self.a {
                    Some(a) if a >= 1 => Ok(RotationNumber::bounded_type(a, d)),
                    _ => Err(CliError::Config("bounded theta needs a >= 1".into())),
                }
            }
            ThetaKind::Quotients => {
                stray("a", self.a.is_some())?;
                stray("value", self.value.is_some())?;
                let qs = self.quotients.clone().unwrap_or_default();
                if qs.is_empty() || qs.contains(&0) {
                    return Err(CliError::Config("quotients must be a nonempty list of positive integers".into()));
                }
                Ok(RotationNumber::from_quotient_fn(d, move |i| qs[i % qs.len()]))
            }
            ThetaKind::Value => {
                stray("a", self.a.is_some())?;
                stray("quotients", self.quotients.is_some())?;
                let s = self
                    .value
                    .as_deref()
                    .ok_or_else(|| CliError::Config("value theta needs a value string".into()))?;
                let x: T = s
                    .parse()
                    .map_err(|_| CliError::Config(format!("theta value {s:?} is not a number")))?;
                Ok(RotationNumber::from_value(x, d)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// File stem; defaults to the experiment kind.
    pub name: Option<String>,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            name: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub precision: Precision,
    /// Seed for every sampled quantity. Nothing else is random.
    #[serde(default)]
    pub seed: u64,
    pub map: Option<MapConfig>,
    pub theta: Option<ThetaConfig>,
    /// Inclusive `[min, max]` levels (or tower depths).
    pub levels: Option<[usize; 2]>,
    /// Renormalization depth for the unimodal experiment.
    pub depth: Option<usize>,
    /// Sample count per interval or grid size, depending on the kind.
    pub samples: Option<usize>,
    /// Truncation level of the measure experiment.
    pub level: Option<usize>,
    pub quadrature_order: Option<usize>,
    /// Partition level of the visit-frequency check.
    pub frequency_level: Option<usize>,
    pub orbit_length: Option<u64>,
    /// Base point of the Birkhoff sums; defaults to the first critical value.
    pub base_point: Option<f64>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Regression baseline to gate against.
    pub baseline: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        // relative paths are taken from the config file's directory
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.output.dir.is_relative() {
            cfg.output.dir = base.join(&cfg.output.dir);
        }
        if let Some(b) = cfg.baseline.as_mut() {
            if b.is_relative() {
                *b = base.join(&*b);
            }
        }
        Ok(cfg)
    }

    /// Applies the precision override from the environment, if set.
    pub fn with_env_precision(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(PRECISION_ENV) {
            if !v.trim().is_empty() {
                self.precision = v.parse()?;
            }
        }
        Ok(self)
    }

    pub fn stem(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn level_range(&self, default: [usize; 2]) -> Result<(usize, usize)> {
        let [lo, hi] = self.levels.unwrap_or(default);
        if lo > hi {
            return Err(CliError::Config(format!("levels [{lo}, {hi}] are reversed")));
        }
        Ok((lo, hi))
    }

    fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let need_map = matches!(self.kind, Rotation | Partition | Realbounds | Measure | Lyapunov);
        if need_map && self.map.is_none() {
            return Err(CliError::Config(format!("kind {} needs a [map] table", self.kind.as_str())));
        }
        if let Some(m) = &self.map {
            m.family()?;
            if !need_map {
                return Err(CliError::Config(format!("kind {} takes no [map] table", self.kind.as_str())));
            }
            if m.omega.is_none() && self.theta.is_none() {
                return Err(CliError::Config("map needs omega, or a [theta] table to tune to".into()));
            }
            if m.tune_tol.is_nan() || m.tune_tol <= 0.0 {
                return Err(CliError::Config("tune_tol must be positive".into()));
            }
        }
        let need_theta = matches!(self.kind, Partition | Realbounds | Measure | Lyapunov);
        if need_theta && self.theta.is_none() {
            return Err(CliError::Config(format!("kind {} needs a [theta] table", self.kind.as_str())));
        }
        self.level_range([0, 0])?;
        if self.samples == Some(0) || self.orbit_length == Some(0) || self.quadrature_order == Some(0) {
            return Err(CliError::Config("samples, orbit_length and quadrature_order must be positive".into()));
        }
        Ok(())
    }
}
