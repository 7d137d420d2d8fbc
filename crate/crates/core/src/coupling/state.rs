use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracops::{AlphaExponent, CostValue};
use crate::noise::{check_dyadic, steps_for, FuturePath, Hurst, PastPath, DEFAULT_PAST_HORIZON};
use crate::sde::DriftSpec;

/// Phase of the coupling construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Init = 0,
    Hitting = 1,
    Coupling = 2,
    Waiting = 3,
}

/// Bookkeeping carried alongside the two solutions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxState {
    pub step: StepKind,
    /// Consecutive successful coupling steps.
    pub n_success: u32,
    /// Failed attempts so far.
    pub n_fail: u32,
    pub wait_time: f64,
}

impl AuxState {
    pub const INITIAL: AuxState = AuxState {
        step: StepKind::Init,
        n_success: 1,
        n_fail: 1,
        wait_time: 0.0,
    };

    pub fn new(step: StepKind, n_success: u32, n_fail: u32, wait_time: f64) -> Result<Self> {
        if !(wait_time >= 0.0 && wait_time.is_finite()) || (wait_time > 0.0 && step != StepKind::Waiting) {
            return Err(Error::InvalidArgument(format!(
                "wait time {wait_time} is only allowed (and positive) while waiting"
            )));
        }
        Ok(Self {
            step,
            n_success,
            n_fail,
            wait_time,
        })
    }
}

impl Default for AuxState {
    fn default() -> Self {
        Self::INITIAL
    }
}

/// Two solutions, their Wiener pasts, and the phase.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w_x: PastPath,
    pub w_y: PastPath,
    pub aux: AuxState,
}

impl CoupledState {
    pub fn new(x: Vec<f64>, y: Vec<f64>, w_x: PastPath, w_y: PastPath, aux: AuxState) -> Result<Self> {
        if w_x.grid() != w_y.grid() || w_x.dim() != w_y.dim() {
            return Err(Error::GridMismatch("the two pasts differ in grid or dimension".into()));
        }
        if x.len() != w_x.dim() || y.len() != w_x.dim() {
            return Err(Error::GridMismatch("state and past dimensions differ".into()));
        }
        Ok(Self { x, y, w_x, w_y, aux })
    }

    pub fn distance(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Test oracle switch: `ForcedSuccess` makes every coupling attempt bind,
/// at the price of wrong marginals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    #[default]
    Normal,
    ForcedSuccess,
}

/// Tunable constants of the coupling construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub h: Hurst,
    pub alpha: f64,
    pub beta: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Base wait after a failed hitting attempt.
    pub t_star: f64,
    /// Base wait after a failed coupling step.
    pub t_tilde_star: f64,
    /// Floor of the coupling threshold, multiplied by `2^(-alpha N)`.
    pub b_const: f64,
    pub dt: f64,
    pub t_past: f64,
    #[serde(default)]
    pub mode: CouplingMode,
}

#[derive(Deserialize)]
struct CalibratedWaits {
    hurst: f64,
    t_star: f64,
    t_tilde_star: f64,
}

#[derive(Deserialize)]
struct CalibratedTable {
    hurst: Vec<CalibratedWaits>,
}

fn calibrated_table() -> &'static [CalibratedWaits] {
    static TABLE: OnceLock<Vec<CalibratedWaits>> = OnceLock::new();
    TABLE.get_or_init(|| {
        toml::from_str::<CalibratedTable>(include_str!("../../../../configs/constants.toml"))
            .expect("shipped constants.toml is valid")
            .hurst
    })
}

/// Calibrated `(t_star, t_tilde_star)` of the nearest calibrated Hurst
/// value on the same side of 1/2 as `h`.
pub fn calibrated_waits(h: Hurst) -> (f64, f64) {
    let v = h.value();
    let side = |x: f64| (x > 0.5) as u8;
    calibrated_table()
        .iter()
        .min_by(|a, b| {
            let key = |c: &CalibratedWaits| (side(c.hurst) != side(v), (c.hurst - v).abs());
            key(a).partial_cmp(&key(b)).unwrap()
        })
        .map(|c| (c.t_star, c.t_tilde_star))
        .unwrap_or((1.0, 4.0))
}

impl CouplingParams {
    /// Defaults for `h` with `kappa1 = c3` of the drift and the calibrated
    /// waits of [`calibrated_waits`].
    pub fn defaults(h: Hurst, drift: &DriftSpec) -> Self {
        let alpha = (0.05_f64).min(0.5 * h.value());
        let (t_star, t_tilde_star) = calibrated_waits(h);
        Self {
            h,
            alpha,
            beta: 1.1 / (1.0 - 2.0 * alpha),
            kappa1: drift.c3,
            kappa2: 12.0,
            t_star,
            t_tilde_star,
            b_const: 0.1,
            dt: 1.0 / 32.0,
            t_past: DEFAULT_PAST_HORIZON,
            mode: CouplingMode::Normal,
        }
    }

    /// Checks the invariants against `drift`.
    pub fn validate(&self, drift: &DriftSpec) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.h.excluded_by_theory() {
            return Err(Error::ExcludedByTheory);
        }
        AlphaExponent::new(self.alpha, self.h)?;
        if !(self.beta > 1.0 / (1.0 - 2.0 * self.alpha)) {
            return bad(format!(
                "beta = {} must exceed 1/(1 - 2 alpha) = {}",
                self.beta,
                1.0 / (1.0 - 2.0 * self.alpha)
            ));
        }
        if (self.kappa1 - drift.c3).abs() > 1e-12 * drift.c3 {
            return bad(format!("kappa1 = {} must equal c3 = {}", self.kappa1, drift.c3));
        }
        let need = 4.0 * drift.admissible_distance().sqrt();
        if !(self.kappa2 >= need) {
            return bad(format!(
                "kappa2 = {} too small: hitting from distance {} within 1/2 needs kappa2 >= {need}",
                self.kappa2,
                drift.admissible_distance()
            ));
        }
        for (name, v) in [("t_star", self.t_star), ("t_tilde_star", self.t_tilde_star), ("b_const", self.b_const)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        check_dyadic(self.dt)?;
        if self.dt > 1.0 / 4.0 {
            return bad(format!("dt = {} too coarse; need dt <= 1/4", self.dt));
        }
        steps_for(self.dt, self.t_past)?;
        if self.t_past < 1.0 {
            return bad(format!("t_past = {} must be at least 1", self.t_past));
        }
        Ok(())
    }

    pub fn alpha_exponent(&self) -> AlphaExponent {
        AlphaExponent::new(self.alpha, self.h).expect("validated alpha")
    }

    /// `4 / (1 - 2 alpha)`.
    pub fn fail_exponent(&self) -> f64 {
        4.0 / (1.0 - 2.0 * self.alpha)
    }
}

/// Whether the attempt of this step bound the two noises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Succeeded,
    Failed,
}

/// Result of one step of the chain.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub kind: OutcomeKind,
    pub duration: f64,
    pub next_aux: AuxState,
    pub wiener_pair: (FuturePath, FuturePath),
    pub cost_after: CostValue,
    /// State at the end of the step.
    pub next: CoupledState,
}
