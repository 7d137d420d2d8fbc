//! Cell-integrated moving-average kernel of the fractional operator.
//!
//! For a grid step `dt` and exponent `p = H - 1/2`, the coefficient
//! `a_m = dt^p * c_m` with
//! `c_m = [F(m+1) - 2F(m) + F(m-1)] / (p+1)` and `F(x) = max(x, 0)^(p+1)`
//! is the exact integral of the power kernel over a pair of cells `m`
//! steps apart, divided by `dt`. Increments of the fractional process over
//! cell `k` are `alpha * sum_m a_m xi_{k-m}` for Wiener increments `xi`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::gamma;

use crate::noise::Hurst;

const SERIES_FROM: usize = 64;

fn pow_plus(x: f64, q: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x.powf(q)
    }
}

/// Unscaled coefficient `c_m` for exponent `p`.
pub fn unit_coeff(p: f64, m: usize) -> f64 {
    let q = p + 1.0;
    if m < SERIES_FROM {
        let mf = m as f64;
        (pow_plus(mf + 1.0, q) - 2.0 * pow_plus(mf, q) + pow_plus(mf - 1.0, q)) / q
    } else {
        let mf = m as f64;
        let x2 = 1.0 / (mf * mf);
        let t1 = (q - 2.0) * (q - 3.0) / 12.0 * x2;
        let t2 = (q - 2.0) * (q - 3.0) * (q - 4.0) * (q - 5.0) / 360.0 * x2 * x2;
        p * mf.powf(p - 1.0) * (1.0 + t1 + t2)
    }
}

/// `sum_{m <= n} c_m = [F(n+1) - F(n)] / (p+1)`; zero for negative `n`.
pub fn unit_partial(p: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let q = p + 1.0;
    if n == 0 {
        return 1.0 / q;
    }
    let nf = n as f64;
    nf.powf(q) * (q * (1.0 / nf).ln_1p()).exp_m1() / q
}

/// Normalisation from the classical moving-average representation on the
/// whole line, without discretisation.
pub fn continuum_alpha(h: f64) -> f64 {
    (2.0 * h * (std::f64::consts::PI * h).sin() * gamma(2.0 * h)).sqrt() / gamma(h + 0.5)
}

/// Constant making `gamma * D_{1-H}` the inverse of `D_H` in the continuum.
pub fn continuum_gamma(h: f64) -> f64 {
    1.0 / (continuum_alpha(h) * continuum_alpha(1.0 - h) * gamma(h + 0.5) * gamma(1.5 - h))
}

/// Kernel coefficients and normalisation for one `(H, dt, lags)` triple.
#[derive(Debug)]
pub struct FracKernel {
    hurst: Hurst,
    dt: f64,
    lags: usize,
    coeffs: Vec<f64>,
    alpha: f64,
    truncation_error: f64,
    inverse: Mutex<Arc<Vec<f64>>>,
}

impl FracKernel {
    fn build(hurst: Hurst, dt: f64, lags: usize) -> Self {
        let p = hurst.kernel_exponent();
        let scale = dt.powf(p);
        let coeffs: Vec<f64> = (0..=lags).map(|m| scale * unit_coeff(p, m)).collect();

        // Var B(1) = alpha^2 dt^{2H} sum_j S_j^2 where S_j collects the
        // coefficients through which cell j reaches [0, 1].
        let cells = (1.0 / dt).round() as i64;
        let m = lags as i64;
        let mut truncated = 0.0;
        let mut full = 0.0;
        let reach = (8 * m).max(8 * cells);
        for j in -reach..cells {
            let lo = (-j).max(0) - 1;
            let s_full = unit_partial(p, cells - 1 - j) - unit_partial(p, lo);
            full += s_full * s_full;
            if j >= -m {
                let s = unit_partial(p, (cells - 1 - j).min(m)) - unit_partial(p, lo);
                truncated += s * s;
            }
        }
        let tail_start = reach as f64;
        full += (cells as f64).powi(2) * p * p * tail_start.powf(2.0 * p - 1.0) / (1.0 - 2.0 * p);
        let alpha = if p == 0.0 {
            1.0
        } else {
            1.0 / (dt.powf(hurst.value()) * truncated.sqrt())
        };
        let truncation_error = ((full - truncated) / full).abs();
        Self {
            hurst,
            dt,
            lags,
            coeffs,
            alpha,
            truncation_error,
            inverse: Mutex::new(Arc::new(Vec::new())),
        }
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lags(&self) -> usize {
        self.lags
    }

    /// `a_0, ..., a_lags`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Normalisation giving unit variance at time 1 under the lag cut-off.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Relative share of the variance of the untruncated discrete
    /// representation that the lag cut-off discards.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    /// First `n` terms of the causal inverse `b` with `a * b = delta`.
    pub fn inverse(&self, n: usize) -> Arc<Vec<f64>> {
        let mut guard = self.inverse.lock().expect("inverse cache poisoned");
        if guard.len() < n {
            let mut b = guard.as_ref().clone();
            let a = &self.coeffs;
            let inv_a0 = 1.0 / a[0];
            b.reserve(n - b.len());
            for k in b.len()..n {
                if k == 0 {
                    b.push(inv_a0);
                    continue;
                }
                let top = k.min(self.lags);
                let s: f64 = (1..=top).map(|m| a[m] * b[k - m]).sum();
                b.push(-s * inv_a0);
            }
            *guard = Arc::new(b);
        }
        guard.clone()
    }
}

/// Shared kernel for `(h, dt, lags)`; built once and cached.
pub fn kernel(h: Hurst, dt: f64, lags: usize) -> Arc<FracKernel> {
    type Key = (u64, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<FracKernel>>>> = OnceLock::new();
    let key = (h.value().to_bits(), dt.to_bits(), lags);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache poisoned").get(&key) {
        return k.clone();
    }
    let built = Arc::new(FracKernel::build(h, dt, lags));
    cache
        .lock()
        .expect("kernel cache poisoned")
        .entry(key)
        .or_insert(built)
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn brownian_kernel_is_identity() {
        let k = kernel(h(0.5), 1.0 / 16.0, 64);
        assert_eq!(k.coeffs()[0], 1.0);
        assert!(k.coeffs()[1..].iter().all(|&c| c == 0.0));
        assert!((k.alpha() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_sums_telescope() {
        for &p in &[-0.4, -0.2, 0.2, 0.4] {
            let mut acc = 0.0;
            for n in 0..200usize {
                acc += unit_coeff(p, n);
                let closed = unit_partial(p, n as i64);
                assert!((acc - closed).abs() < 1e-11 * (1.0 + closed.abs()), "p={p} n={n}");
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        for &p in &[-0.45, -0.1, 0.1, 0.45] {
            let q = p + 1.0;
            let m = SERIES_FROM as f64;
            let direct = ((m + 1.0).powf(q) - 2.0 * m.powf(q) + (m - 1.0).powf(q)) / q;
            let series = unit_coeff(p, SERIES_FROM);
            assert!((direct - series).abs() < 1e-9 * series.abs(), "p={p}");
        }
    }

    #[test]
    fn alpha_approaches_continuum_value() {
        for &hv in &[0.3, 0.7] {
            let k = kernel(h(hv), 1.0 / 64.0, 64 * 64);
            let c = continuum_alpha(hv);
            assert!((k.alpha() / c - 1.0).abs() < 0.03, "H={hv}: {} vs {c}", k.alpha());
        }
    }

    #[test]
    fn inverse_sequence_inverts() {
        let k = kernel(h(0.3), 1.0 / 8.0, 40);
        let b = k.inverse(120);
        for n in 0..120 {
            let s: f64 = (0..=n.min(40)).map(|m| k.coeffs()[m] * b[n - m]).sum();
            let expect = if n == 0 { 1.0 } else { 0.0 };
            assert!((s - expect).abs() < 1e-10, "n={n}: {s}");
        }
    }

    #[test]
    fn continuum_gamma_is_symmetric() {
        for &hv in &[0.1, 0.3, 0.45] {
            assert!((continuum_gamma(hv) - continuum_gamma(1.0 - hv)).abs() < 1e-10);
        }
    }
}
