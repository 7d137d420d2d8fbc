use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::RunRecord;
use crate::error::{Error, Result};
use crate::noise::Hurst;

/// Fewest points accepted in the tail fit.
pub const MIN_FIT_POINTS: usize = 20;
/// Bootstrap resamples for the confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 400;

/// Empirical survival function of the coupling time and a power-law fit of
/// its tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Starts at 0; then every distinct coupling time, then `t_max`.
    pub t_values: Vec<f64>,
    /// Fraction of runs with coupling time `> t` (censored runs count as
    /// beyond `t_max`).
    pub survival: Vec<f64>,
    /// `gamma` in `P(tau > t) ~ t^-gamma`; `None` when the tail is too short
    /// to fit.
    pub fitted_gamma: Option<f64>,
    pub gamma_ci: Option<(f64, f64)>,
    pub sample_count: usize,
    pub censored_count: usize,
}

impl TailEstimate {
    /// From coupling times (`None` = censored at `t_max`).
    pub fn from_times(times: &[Option<f64>], t_max: f64, seed: u64) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::EmptyExperiment);
        }
        let mut obs: Vec<f64> = times.iter().flatten().copied().collect();
        if obs.is_empty() {
            return Err(Error::NoCouplingObserved);
        }
        obs.sort_by(f64::total_cmp);
        let n = times.len();
        let mut t_values = vec![0.0];
        let mut survival = vec![1.0];
        let mut i = 0;
        while i < obs.len() {
            let t = obs[i];
            while i < obs.len() && obs[i] == t {
                i += 1;
            }
            if t == 0.0 {
                survival[0] = (n - i) as f64 / n as f64;
            } else {
                t_values.push(t);
                survival.push((n - i) as f64 / n as f64);
            }
        }
        if *t_values.last().unwrap() < t_max {
            t_values.push(t_max);
            survival.push(*survival.last().unwrap());
        }
        let fitted_gamma = fit_gamma(times);
        let gamma_ci = fitted_gamma.and_then(|_| bootstrap_ci(times, seed));
        Ok(Self {
            t_values,
            survival,
            fitted_gamma,
            gamma_ci,
            sample_count: n,
            censored_count: n - obs.len(),
        })
    }

    pub fn from_runs(runs: &[RunRecord], seed: u64) -> Result<Self> {
        let t_max = runs.iter().map(|r| r.t_max).fold(0.0, f64::max);
        let times: Vec<Option<f64>> = runs.iter().map(|r| r.tau_infinity).collect();
        Self::from_times(&times, t_max, seed)
    }

    pub fn gamma_is_undefined(&self) -> bool {
        self.fitted_gamma.is_none()
    }

    /// Survival at `t` (right-continuous step function).
    pub fn survival_at(&self, t: f64) -> f64 {
        let k = self.t_values.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Least-squares slope of `log S` against `log t` over the upper half of
/// the uncensored times, negated.
pub fn fit_gamma(times: &[Option<f64>]) -> Option<f64> {
    let n = times.len() as f64;
    let mut obs: Vec<f64> = times.iter().flatten().copied().filter(|t| *t > 0.0).collect();
    obs.sort_by(f64::total_cmp);
    let window = &obs[obs.len() / 2..];
    let mut pts = Vec::with_capacity(window.len());
    for &t in window {
        let beyond = times.iter().filter(|x| x.is_none_or(|v| v > t)).count() as f64;
        if beyond > 0.0 {
            pts.push((t.ln(), (beyond / n).ln()));
        }
    }
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 1e-12 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}

/// Percentile interval (2.5%, 97.5%) of the fitted exponent over resampled
/// runs.
fn bootstrap_ci(times: &[Option<f64>], seed: u64) -> Option<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007_57a9);
    let n = times.len();
    let mut fits = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut sample = vec![None; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for s in sample.iter_mut() {
            *s = times[rng.random_range(0..n)];
        }
        if let Some(g) = fit_gamma(&sample) {
            fits.push(g);
        }
    }
    if fits.len() < BOOTSTRAP_RESAMPLES / 2 {
        return None;
    }
    fits.sort_by(f64::total_cmp);
    let q = |p: f64| fits[((p * (fits.len() - 1) as f64).round()) as usize];
    Some((q(0.025), q(0.975)))
}

/// `min(2, 2 P(tau > t))` at each tabulated time.
pub fn tv_bound(tail: &TailEstimate) -> Vec<(f64, f64)> {
    tail.t_values
        .iter()
        .zip(&tail.survival)
        .map(|(&t, &s)| (t, (2.0 * s).clamp(0.0, 2.0)))
        .collect()
}

/// Supremum of the decay exponents covered by the convergence theorems.
pub fn theory_gamma(h: Hurst) -> Result<f64> {
    let h = h.value();
    if h == 0.5 {
        Err(Error::ExcludedByTheory)
    } else if h > 0.5 || h >= 0.25 {
        Ok(0.125)
    } else {
        Ok(h * (1.0 - 2.0 * h))
    }
}
