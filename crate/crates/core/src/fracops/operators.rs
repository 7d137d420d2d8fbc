use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::conv;
use super::kernel::kernel;
use crate::noise::{Hurst, PastPath};

/// Normalisations of the operator pair `D_H`, `D_{1-H}` on one grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorConstants {
    pub hurst: Hurst,
    pub dt: f64,
    pub lags: usize,
    pub alpha_h: f64,
    pub alpha_dual: f64,
    /// Least-squares constant making `gamma * D_{1-H}` invert `D_H`.
    pub gamma: f64,
}

impl OperatorConstants {
    /// Constant in front of the future-influence kernel.
    pub fn g2_constant(&self) -> f64 {
        (0.5 - self.hurst.value()) * self.alpha_h * self.gamma * self.alpha_dual
    }

    /// Constant in front of the tail term of the cost.
    pub fn cost_tail_constant(&self) -> f64 {
        ((2.0 * self.hurst.value() - 1.0) * self.alpha_h).abs()
    }

    /// Constant of the Wiener-to-fractional drift transfer.
    pub fn w_to_b_constant(&self) -> f64 {
        self.alpha_h
    }

    /// Constant of the fractional-to-Wiener drift transfer.
    pub fn b_to_w_constant(&self) -> f64 {
        self.gamma * self.alpha_dual
    }
}

/// Cached constants for `(h, dt, lags)`.
pub fn constants(h: Hurst, dt: f64, lags: usize) -> OperatorConstants {
    type Key = (u64, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, OperatorConstants>>> = OnceLock::new();
    let key = (h.value().to_bits(), dt.to_bits(), lags);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("constant cache poisoned").get(&key) {
        return *c;
    }
    let gamma = if h.excluded_by_theory() {
        1.0
    } else {
        calibrate_gamma(h, dt, lags)
    };
    let c = OperatorConstants {
        hurst: h,
        dt,
        lags,
        alpha_h: kernel(h, dt, lags).alpha(),
        alpha_dual: kernel(h.dual(), dt, lags).alpha(),
        gamma,
    };
    *cache
        .lock()
        .expect("constant cache poisoned")
        .entry(key)
        .or_insert(c)
}

/// Smooth bump `exp(1 - 1/(1 - x^2))` on `|x| < 1`.
pub fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

fn increments_of(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

fn path_of(increments: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; increments.len() + 1];
    for i in (0..increments.len()).rev() {
        out[i] = out[i + 1] - increments[i];
    }
    out
}

fn apply_raw(h: Hurst, dt: f64, lags: usize, increments: &[f64]) -> Vec<f64> {
    let k = kernel(h, dt, lags);
    let alpha = k.alpha();
    conv::causal(k.coeffs(), increments, increments.len())
        .into_iter()
        .map(|v| alpha * v)
        .collect()
}

/// Fits `gamma` so that `gamma * D_{1-H} D_H` is closest to the identity on
/// a family of smooth bumps placed inside the window.
fn calibrate_gamma(h: Hurst, dt: f64, lags: usize) -> f64 {
    let window = lags as f64 * dt;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(centre, width) in &[(0.5, 0.25), (0.5, 0.125), (0.4, 0.0625), (0.6, 0.03125)] {
        let c = -centre * window;
        let r = width * window;
        if r < 16.0 * dt {
            continue;
        }
        let w: Vec<f64> = (0..=lags)
            .map(|i| bump((-((lags - i) as f64) * dt - c) / r))
            .collect();
        let inc = increments_of(&w);
        let there = apply_raw(h, dt, lags, &inc);
        let back = path_of(&apply_raw(h.dual(), dt, lags, &there));
        num += w.iter().zip(&back).map(|(a, b)| a * b).sum::<f64>();
        den += back.iter().map(|b| b * b).sum::<f64>();
    }
    if den == 0.0 {
        crate::fracops::kernel::continuum_gamma(h.value())
    } else {
        num / den
    }
}

fn map_coordinates(w: &PastPath, f: impl Fn(&[f64]) -> Vec<f64>) -> PastPath {
    let dim = w.dim();
    let n = w.n_steps();
    let inc = w.increments();
    let mut out = vec![0.0; n * dim];
    let mut col = vec![0.0; n];
    for c in 0..dim {
        for (i, v) in col.iter_mut().enumerate() {
            *v = inc[i * dim + c];
        }
        for (i, v) in f(&col).into_iter().enumerate() {
            out[i * dim + c] = v;
        }
    }
    PastPath::from_increments(w.dt(), dim, &out).expect("same grid as input")
}

/// Discretised `D_H` on a past path: the power kernel is integrated exactly
/// over each pair of cells against the piecewise-constant increments.
pub fn apply_dh(w: &PastPath, h: Hurst) -> PastPath {
    if h.excluded_by_theory() {
        return w.clone();
    }
    let (dt, lags) = (w.dt(), w.n_steps());
    map_coordinates(w, |inc| apply_raw(h, dt, lags, inc))
}

/// `gamma_H * D_{1-H}` with the calibrated `gamma_H`.
pub fn apply_dh_inverse(b: &PastPath, h: Hurst) -> PastPath {
    if h.excluded_by_theory() {
        return b.clone();
    }
    let (dt, lags) = (b.dt(), b.n_steps());
    let gamma = constants(h, dt, lags).gamma;
    map_coordinates(b, |inc| {
        apply_raw(h.dual(), dt, lags, inc)
            .into_iter()
            .map(|v| gamma * v)
            .collect()
    })
}
