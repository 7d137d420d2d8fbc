use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingMode, CouplingParams, InitialLaw};
use crate::error::{Error, Result};
use crate::noise::Hurst;
use crate::sde::{DiffusionMatrix, DriftSpec};

/// Drift presets selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftPreset {
    DoubleWell,
    Linear,
    Custom,
}

impl std::str::FromStr for DriftPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double-well" => Ok(Self::DoubleWell),
            "linear" => Ok(Self::Linear),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!(
                "unknown drift preset {other:?}; expected double-well, linear or custom"
            ))),
        }
    }
}

fn default_dim() -> usize {
    1
}

fn default_rate() -> f64 {
    1.0
}

fn default_x0() -> InitialLaw {
    InitialLaw::Point { value: vec![2.0] }
}

fn default_y0() -> InitialLaw {
    InitialLaw::Gaussian {
        mean: vec![0.0],
        sd: 1.0,
    }
}

/// Everything needed to run a batch of coupled chains. Coupling constants
/// left unset take the defaults for the chosen Hurst parameter and drift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hurst: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_tilde_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_const: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_past: Option<f64>,
    #[serde(default)]
    pub mode: CouplingMode,

    pub drift: DriftPreset,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Decay rate of the linear preset.
    #[serde(default = "default_rate")]
    pub rate: f64,
    /// Coefficients of the custom polynomial drift, constant term first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coeffs: Vec<f64>,

    pub sample_count: usize,
    pub t_max: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_x0")]
    pub x0: InitialLaw,
    #[serde(default = "default_y0")]
    pub y0: InitialLaw,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub params: CouplingParams,
    pub drift: DriftSpec,
    pub sigma: DiffusionMatrix,
    pub mu_x: InitialLaw,
    pub mu_y: InitialLaw,
    pub sample_count: usize,
    pub t_max: f64,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Double-well defaults at `hurst`.
    pub fn new(hurst: f64, sample_count: usize, t_max: f64, seed: u64) -> Self {
        Self {
            hurst,
            alpha: None,
            beta: None,
            kappa1: None,
            kappa2: None,
            t_star: None,
            t_tilde_star: None,
            b_const: None,
            dt: None,
            t_past: None,
            mode: CouplingMode::Normal,
            drift: DriftPreset::DoubleWell,
            dim: 1,
            rate: 1.0,
            coeffs: Vec::new(),
            sample_count,
            t_max,
            seed,
            out: None,
            workers: None,
            x0: default_x0(),
            y0: default_y0(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn drift_spec(&self) -> Result<DriftSpec> {
        match self.drift {
            DriftPreset::DoubleWell => DriftSpec::double_well(self.dim),
            DriftPreset::Linear => DriftSpec::linear(self.dim, self.rate),
            DriftPreset::Custom => DriftSpec::custom_polynomial(self.dim, &self.coeffs),
        }
    }

    /// Coupling constants with overrides applied. `beta` follows `alpha`
    /// unless set.
    pub fn params(&self, drift: &DriftSpec) -> Result<CouplingParams> {
        let h = Hurst::new(self.hurst)?;
        let mut p = CouplingParams::defaults(h, drift);
        if let Some(a) = self.alpha {
            p.alpha = a;
            p.beta = 1.1 / (1.0 - 2.0 * a);
        }
        let overrides = [
            (&mut p.beta, self.beta),
            (&mut p.kappa1, self.kappa1),
            (&mut p.kappa2, self.kappa2),
            (&mut p.t_star, self.t_star),
            (&mut p.t_tilde_star, self.t_tilde_star),
            (&mut p.b_const, self.b_const),
            (&mut p.dt, self.dt),
            (&mut p.t_past, self.t_past),
        ];
        for (slot, v) in overrides {
            if let Some(v) = v {
                *slot = v;
            }
        }
        p.mode = self.mode;
        Ok(p)
    }

    /// Checks every invariant before any chain runs.
    pub fn validate(&self) -> Result<Experiment> {
        let drift = self.drift_spec()?;
        let params = self.params(&drift)?;
        params.validate(&drift)?;
        if self.sample_count == 0 {
            return Err(Error::EmptyExperiment);
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::Config(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.x0.dim() != self.dim || self.y0.dim() != self.dim {
            return Err(Error::Config(format!(
                "initial laws must have dimension {}, got {} and {}",
                self.dim,
                self.x0.dim(),
                self.y0.dim()
            )));
        }
        for law in [&self.x0, &self.y0] {
            if let InitialLaw::Gaussian { sd, .. } = law {
                if !(sd.is_finite() && *sd >= 0.0) {
                    return Err(Error::Config(format!("initial standard deviation must be >= 0, got {sd}")));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        Ok(Experiment {
            params,
            sigma: DiffusionMatrix::identity(self.dim),
            drift,
            mu_x: self.x0.clone(),
            mu_y: self.y0.clone(),
            sample_count: self.sample_count,
            t_max: self.t_max,
            seed: self.seed,
            workers: self.workers,
        })
    }
}
