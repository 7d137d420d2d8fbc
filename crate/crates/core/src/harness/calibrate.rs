use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::run_rng;
use crate::coupling::{
    is_admissible, step0, step1, step2, step3, AuxState, CoupledState, CouplingParams, InitialLaw, OutcomeKind,
    state_cost, StepKind,
};
use crate::error::{Error, Result};
use crate::noise::{sample_past, Hurst};
use crate::sde::{DiffusionMatrix, DriftSpec};

/// Retries allowed when drawing a scenario with a required outcome.
const MAX_RETRIES: usize = 100_000;

/// The model and constants a calibration runs against.
#[derive(Clone, Debug)]
pub struct Setting {
    pub params: CouplingParams,
    pub drift: DriftSpec,
    pub sigma: DiffusionMatrix,
    pub mu_x: InitialLaw,
    pub mu_y: InitialLaw,
}

impl Setting {
    /// One-dimensional double well, `x0 = 2`, `y0 ~ N(0, 1)`, default
    /// constants.
    pub fn double_well(h: Hurst) -> Result<Self> {
        let drift = DriftSpec::double_well(1)?;
        Ok(Self {
            params: CouplingParams::defaults(h, &drift),
            sigma: DiffusionMatrix::identity(1),
            drift,
            mu_x: InitialLaw::Point { value: vec![2.0] },
            mu_y: InitialLaw::Gaussian {
                mean: vec![0.0],
                sd: 1.0,
            },
        })
    }

    /// A state at the start of a first hitting attempt: shared past,
    /// independent initial points, then the contraction step.
    pub fn entry_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CoupledState> {
        let p = &self.params;
        for _ in 0..MAX_RETRIES {
            let past = sample_past(rng, p.dt, p.t_past, self.drift.dim)?;
            let z = CoupledState::new(
                self.mu_x.sample(rng),
                self.mu_y.sample(rng),
                past.clone(),
                past,
                AuxState::INITIAL,
            )?;
            let next = step0(&z, p, &self.drift, &self.sigma, rng)?.next;
            if is_admissible(&next, p, &self.drift) {
                return Ok(next);
            }
        }
        Err(Error::InvalidArgument("no admissible entry state found".into()))
    }

    /// State right after a failed hitting attempt, in the waiting phase,
    /// with the largest cost the wait may leave behind: the cost at entry
    /// plus `1/(2 max(n_fail, 1)^2)`.
    pub fn failed_hitting<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WaitScenario> {
        for _ in 0..MAX_RETRIES {
            let z = self.entry_state(rng)?;
            let out = step1(&z, &self.params, &self.drift, &self.sigma, rng)?;
            if out.kind == OutcomeKind::Failed {
                let n = z.aux.n_fail.max(1) as f64;
                let cost_budget = state_cost(&z, &self.params)?.value() + 0.5 / (n * n);
                return Ok(WaitScenario {
                    state: out.next,
                    cost_budget,
                });
            }
        }
        Err(Error::InvalidArgument("hitting never failed".into()))
    }

    /// State right after a failed coupling step that followed a successful
    /// hitting attempt, with the same kind of cost budget as
    /// [`Setting::failed_hitting`].
    pub fn failed_coupling<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<WaitScenario> {
        let (p, d, s) = (&self.params, &self.drift, &self.sigma);
        for _ in 0..MAX_RETRIES {
            let entry = self.entry_state(rng)?;
            let hit = step1(&entry, p, d, s, rng)?;
            if hit.kind == OutcomeKind::Failed {
                continue;
            }
            let mut z = hit.next;
            // Coupling steps get long; give up on chains that keep binding.
            while z.aux.n_success < 8 {
                let out = step2(&z, p, d, s, rng)?;
                if out.kind == OutcomeKind::Failed {
                    let n = entry.aux.n_fail.max(1) as f64;
                    let cost_budget = state_cost(&entry, p)?.value() + 0.5 / (n * n);
                    return Ok(WaitScenario {
                        state: out.next,
                        cost_budget,
                    });
                }
                z = out.next;
            }
        }
        Err(Error::InvalidArgument("coupling never failed".into()))
    }

    pub fn readmissible(&self, sc: &WaitScenario, wait: f64, seed: u64) -> Result<bool> {
        let z = &sc.state;
        let mut w = z.clone();
        w.aux = AuxState::new(StepKind::Waiting, z.aux.n_success, z.aux.n_fail, wait)?;
        let mut rng = run_rng(seed, 0);
        let out = step3(&w, &self.params, &self.drift, &self.sigma, &mut rng)?;
        Ok(is_admissible(&out.next, &self.params, &self.drift)
            && state_cost(&out.next, &self.params)?.value() <= sc.cost_budget)
    }

    /// Success rate of hitting attempts from fresh entry states.
    pub fn hitting_success_rate(&self, seed: u64, attempts: usize) -> Result<f64> {
        let wins: Result<Vec<bool>> = (0..attempts)
            .into_par_iter()
            .map(|i| {
                let mut rng = run_rng(seed, i);
                let z = self.entry_state(&mut rng)?;
                let out = step1(&z, &self.params, &self.drift, &self.sigma, &mut rng)?;
                Ok(out.kind == OutcomeKind::Succeeded)
            })
            .collect();
        let wins = wins?;
        Ok(wins.iter().filter(|w| **w).count() as f64 / attempts as f64)
    }

    /// `(attempts, failures)` of the `N`-th consecutive coupling step,
    /// `N = 0..=max_n`, over `chains` chains started by a successful hit.
    pub fn coupling_failure_counts(&self, seed: u64, chains: usize, max_n: u32) -> Result<Vec<(usize, usize)>> {
        let (p, d, s) = (&self.params, &self.drift, &self.sigma);
        let per_chain: Result<Vec<Option<u32>>> = (0..chains)
            .into_par_iter()
            .map(|i| {
                let mut rng = run_rng(seed, i);
                let mut z = loop {
                    let z = self.entry_state(&mut rng)?;
                    let hit = step1(&z, p, d, s, &mut rng)?;
                    if hit.kind == OutcomeKind::Succeeded {
                        break hit.next;
                    }
                };
                for n in 0..=max_n {
                    let out = step2(&z, p, d, s, &mut rng)?;
                    if out.kind == OutcomeKind::Failed {
                        return Ok(Some(n));
                    }
                    z = out.next;
                }
                Ok(None)
            })
            .collect();
        let mut counts = vec![(0usize, 0usize); max_n as usize + 1];
        for fail_at in per_chain? {
            let last = fail_at.unwrap_or(max_n) as usize;
            for (n, c) in counts.iter_mut().enumerate().take(last + 1) {
                c.0 += 1;
                if fail_at == Some(n as u32) {
                    c.1 += 1;
                }
            }
        }
        Ok(counts)
    }
}

/// Smallest grid multiple of `dt` in `(0, hi]` for which `ok` holds,
/// assuming `ok` is monotone. `None` if it fails at `hi`.
pub fn bisect_wait<F: Fn(f64) -> Result<bool>>(dt: f64, hi: f64, ok: F) -> Result<Option<f64>> {
    let mut hi_k = (hi / dt).ceil() as u64;
    if !ok(hi_k as f64 * dt)? {
        return Ok(None);
    }
    let mut lo_k = 0u64;
    while hi_k - lo_k > 1 {
        let mid = (lo_k + hi_k) / 2;
        if ok(mid as f64 * dt)? {
            hi_k = mid;
        } else {
            lo_k = mid;
        }
    }
    Ok(Some(hi_k as f64 * dt))
}

/// Smallest base wait after which every scenario is admissible again
/// and within its cost budget.
/// `scale(z)` converts a base wait into the actual wait for scenario `z`.
fn calibrate_base_wait(
    setting: &Setting,
    scenarios: &[WaitScenario],
    seed: u64,
    hi: f64,
    scale: impl Fn(&CoupledState) -> f64 + Sync,
) -> Result<Option<f64>> {
    bisect_wait(setting.params.dt, hi, |base| {
        let all: Result<Vec<bool>> = scenarios
            .par_iter()
            .enumerate()
            .map(|(i, sc)| setting.readmissible(sc, base * scale(&sc.state), seed.wrapping_add(i as u64)))
            .collect();
        Ok(all?.into_iter().all(|b| b))
    })
}

/// Options of a calibration run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub hursts: Vec<f64>,
    pub hitting_scenarios: usize,
    pub coupling_scenarios: usize,
    pub hitting_attempts: usize,
    pub coupling_chains: usize,
    pub max_n: u32,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            hursts: vec![0.3, 0.7],
            hitting_scenarios: 200,
            coupling_scenarios: 64,
            hitting_attempts: 2000,
            coupling_chains: 2000,
            max_n: 6,
            seed: 2024,
        }
    }
}

/// Calibrated constants for one Hurst parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstConstants {
    pub hurst: f64,
    /// Smallest base wait after a failed hitting attempt that restored
    /// admissibility within the cost budget in every scenario.
    pub t_star_min: f64,
    /// Same after a failed coupling step.
    pub t_tilde_star_min: f64,
    /// Recommended waits: the minima rounded up to a power of two.
    pub t_star: f64,
    pub t_tilde_star: f64,
    /// Half the empirical hitting success rate.
    pub delta: f64,
    /// Smallest `K` with failure rate `<= K 2^(-alpha N)` for all `N`.
    pub k_fail: f64,
    pub failure_rates: Vec<f64>,
}

/// Contents of `constants.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub version: u32,
    pub seed: u64,
    pub hitting_scenarios: usize,
    pub coupling_scenarios: usize,
    pub hurst: Vec<HurstConstants>,
}

fn safe_wait(min: f64) -> f64 {
    2f64.powf(min.log2().ceil())
}

/// A waiting state and the largest cost allowed once the wait is over.
#[derive(Clone, Debug)]
pub struct WaitScenario {
    pub state: CoupledState,
    pub cost_budget: f64,
}

/// Longest base wait tried before giving up.
pub const MAX_CALIBRATED_WAIT: f64 = 64.0;

pub fn calibrate_hurst(setting: &Setting, cfg: &CalibrationConfig) -> Result<HurstConstants> {
    let p = &setting.params;
    let seed = cfg.seed;
    let hit_states: Vec<WaitScenario> = (0..cfg.hitting_scenarios)
        .into_par_iter()
        .map(|i| setting.failed_hitting(&mut run_rng(seed, i)))
        .collect::<Result<_>>()?;
    // Waiting states store the wait of the failed step; recover its scale.
    let t_star_min = calibrate_base_wait(setting, &hit_states, seed, MAX_CALIBRATED_WAIT, |z| {
        z.aux.wait_time / p.t_star
    })?
    .ok_or_else(|| Error::Config("no hitting wait up to the limit restores admissibility".into()))?;

    let cpl_states: Vec<WaitScenario> = (0..cfg.coupling_scenarios)
        .into_par_iter()
        .map(|i| setting.failed_coupling(&mut run_rng(seed ^ 0x5eed, i)))
        .collect::<Result<_>>()?;
    let ratio = |z: &CoupledState| z.aux.wait_time / p.t_tilde_star;
    let t_tilde_star_min = calibrate_base_wait(setting, &cpl_states, seed, MAX_CALIBRATED_WAIT, ratio)?
        .ok_or_else(|| Error::Config("no coupling wait up to the limit restores admissibility".into()))?;

    let rate = setting.hitting_success_rate(seed ^ 0xde17a, cfg.hitting_attempts)?;
    let counts = setting.coupling_failure_counts(seed ^ 0xfa11, cfg.coupling_chains, cfg.max_n)?;
    let failure_rates: Vec<f64> = counts
        .iter()
        .map(|&(a, f)| if a == 0 { 0.0 } else { f as f64 / a as f64 })
        .collect();
    let k_fail = failure_rates
        .iter()
        .enumerate()
        .map(|(n, r)| r * 2f64.powf(p.alpha * n as f64))
        .fold(0.0, f64::max);
    Ok(HurstConstants {
        hurst: p.h.value(),
        t_star_min,
        t_tilde_star_min,
        t_star: safe_wait(t_star_min),
        t_tilde_star: safe_wait(t_tilde_star_min),
        delta: rate / 2.0,
        k_fail,
        failure_rates,
    })
}

pub fn calibrate(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    let mut hurst = Vec::new();
    for &h in &cfg.hursts {
        let setting = Setting::double_well(Hurst::new(h)?)?;
        hurst.push(calibrate_hurst(&setting, cfg)?);
    }
    Ok(CalibrationReport {
        version: 1,
        seed: cfg.seed,
        hitting_scenarios: cfg.hitting_scenarios,
        coupling_scenarios: cfg.coupling_scenarios,
        hurst,
    })
}

impl CalibrationReport {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
