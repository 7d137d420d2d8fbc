//! Wiener and fractional Brownian paths on dyadic grids.

mod grid;
pub mod io;
mod paths;

pub use grid::{check_dyadic, round_up, steps_ceil, steps_for, Hurst, TimeGrid};
pub use io::SampledPath;
pub use paths::{FbmPath, FuturePath, PastPath};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fracops::{conv, kernel, FracKernel};

/// Past horizon used when none is configured.
pub const DEFAULT_PAST_HORIZON: f64 = 64.0;

/// `E[B(s) B(t)]` for a standard fBm.
pub fn fbm_covariance(h: Hurst, s: f64, t: f64) -> f64 {
    let two_h = 2.0 * h.value();
    0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (t - s).abs().powf(two_h))
}

/// Cholesky sampler for fBm on the points of a grid, relative to its origin.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    grid: TimeGrid,
    hurst: Hurst,
    factor: DMatrix<f64>,
}

impl ExactSampler {
    pub fn new(grid: TimeGrid, hurst: Hurst) -> Result<Self> {
        let n = grid.n_steps();
        let times: Vec<f64> = (1..=n).map(|i| i as f64 * grid.dt()).collect();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(hurst, times[i], times[j]));
        let chol = cov.cholesky().ok_or(Error::IllConditionedGrid)?;
        let factor = chol.unpack();
        if factor.diagonal().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::IllConditionedGrid);
        }
        Ok(Self { grid, hurst, factor })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, dim: usize) -> Result<FbmPath> {
        let n = self.grid.n_steps();
        let mut values = vec![0.0; (n + 1) * dim];
        for c in 0..dim {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.factor * z;
            for i in 0..n {
                values[(i + 1) * dim + c] = x[i];
            }
        }
        FbmPath::new(self.grid, dim, values, self.hurst)
    }
}

/// Exact Gaussian sample of an fBm on `grid`, seeded deterministically.
pub fn sample_fbm_exact(grid: TimeGrid, h: Hurst, dim: usize, rng_seed: u64) -> Result<FbmPath> {
    let sampler = ExactSampler::new(grid, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sampler.sample(&mut rng, dim)
}

/// `n * dim` independent `N(0, dt)` cell increments.
pub fn wiener_increments<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize, dt: f64) -> Vec<f64> {
    let sd = dt.sqrt();
    (0..n * dim)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

pub fn sample_past<R: Rng + ?Sized>(rng: &mut R, dt: f64, horizon: f64, dim: usize) -> Result<PastPath> {
    let n = steps_for(dt, horizon)?;
    PastPath::from_increments(dt, dim, &wiener_increments(rng, n, dim, dt))
}

pub fn sample_future<R: Rng + ?Sized>(rng: &mut R, dt: f64, duration: f64, dim: usize) -> Result<FuturePath> {
    let n = steps_for(dt, duration)?;
    FuturePath::from_increments(dt, dim, &wiener_increments(rng, n, dim, dt))
}

/// Increments of the fractional process over the future cells, given the
/// Wiener increments of the past (oldest first) and of the future, both
/// row-major with `dim` columns.
pub fn fbm_increments(k: &FracKernel, past: &[f64], future: &[f64], dim: usize) -> Vec<f64> {
    let n = future.len() / dim;
    if k.hurst().excluded_by_theory() {
        return future.to_vec();
    }
    let m = (past.len() / dim).min(k.lags());
    let mut joined = Vec::with_capacity((m + n) * dim);
    joined.extend_from_slice(&past[past.len() - m * dim..]);
    joined.extend_from_slice(future);
    let all = conv::causal_rows(k.coeffs(), &joined, dim, m + n);
    let alpha = k.alpha();
    all[m * dim..].iter().map(|v| alpha * v).collect()
}

/// fBm on `[0, T]` induced by the joined Wiener path through the
/// moving-average representation. The kernel reaches back over the whole
/// stored past.
pub fn fbm_from_wiener(past: &PastPath, future: &FuturePath, h: Hurst) -> Result<FbmPath> {
    if past.dt() != future.dt() || past.dim() != future.dim() {
        return Err(Error::GridMismatch(
            "past and future differ in step or dimension".into(),
        ));
    }
    let k = kernel(h, past.dt(), past.n_steps());
    let incs = fbm_increments(&k, &past.increments(), &future.increments(), past.dim());
    FbmPath::from_increments(future.dt(), future.dim(), &incs, h)
}

/// New past after running for time `t` on `future`: the joined path seen
/// from time `t`, keeping the original horizon.
pub fn concat_pt(past: &PastPath, future: &FuturePath, t: f64) -> Result<PastPath> {
    if past.dt() != future.dt() || past.dim() != future.dim() {
        return Err(Error::GridMismatch(
            "past and future differ in step or dimension".into(),
        ));
    }
    let k = steps_for(past.dt(), t)?;
    if k > future.n_steps() {
        return Err(Error::HorizonExceeded(format!(
            "t = {t} beyond future horizon {}",
            future.horizon()
        )));
    }
    let dim = past.dim();
    let n = past.n_steps();
    let anchor = future.point(k).to_vec();
    let mut values = vec![0.0; (n + 1) * dim];
    for i in 0..=n {
        let back = n - i;
        for c in 0..dim {
            values[i * dim + c] = if back < k {
                future.point(k - back)[c] - anchor[c]
            } else {
                past.point(n - (back - k))[c] - anchor[c]
            };
        }
    }
    PastPath::new(*past.grid(), dim, values)
}

/// `(theta_t w)(s) = w(s - t) - w(-t)` on the shortened horizon.
pub fn shift_theta(past: &PastPath, t: f64) -> Result<PastPath> {
    let k = steps_for(past.dt(), t)?;
    let n = past.n_steps();
    if k == 0 {
        return Ok(past.clone());
    }
    if k >= n {
        return Err(Error::HorizonExceeded(format!(
            "shift {t} consumes the whole horizon {}",
            past.horizon()
        )));
    }
    let dim = past.dim();
    let keep = n - k;
    let anchor = past.point(keep).to_vec();
    let mut values = Vec::with_capacity((keep + 1) * dim);
    for i in 0..=keep {
        for c in 0..dim {
            values.push(past.point(i)[c] - anchor[c]);
        }
    }
    let grid = TimeGrid::backward(past.dt(), keep as f64 * past.dt())?;
    PastPath::new(grid, dim, values)
}

/// Weighted Hölder norm: the supremum over grid pairs of
/// `|w(t) - w(s)| / (|t - s|^((1-H)/2) * (1 + |t| + |s|)^(1/2))`.
pub fn holder_norm(path: &PastPath, h: Hurst) -> f64 {
    let n = path.n_steps();
    let dt = path.dt();
    let dim = path.dim();
    let expo = (1.0 - h.value()) / 2.0;
    let lag_w: Vec<f64> = (0..=n).map(|l| (l as f64 * dt).powf(expo)).collect();
    // |t| + |s| = (2n - i - j) dt for grid indices i, j.
    let pos_w: Vec<f64> = (0..=2 * n).map(|m| (1.0 + m as f64 * dt).sqrt()).collect();
    let v = path.values();
    let mut best = 0.0_f64;
    for i in 0..=n {
        for j in i + 1..=n {
            let d2: f64 = (0..dim)
                .map(|c| (v[j * dim + c] - v[i * dim + c]).powi(2))
                .sum();
            if d2 == 0.0 {
                continue;
            }
            let r = d2.sqrt() / (lag_w[j - i] * pos_w[2 * n - i - j]);
            best = best.max(r);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn covariance_examples() {
        assert!((fbm_covariance(h(0.3), 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(h(0.5), 1.0, 2.0) - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(h(0.75), 1.0, 2.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn self_similarity_of_covariance() {
        let hv = h(0.3);
        let a: f64 = 3.0;
        let t = 0.7;
        let lhs = fbm_covariance(hv, a * t, a * t);
        let rhs = a.powf(0.6) * fbm_covariance(hv, t, t);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn single_step_sample_has_right_scale() {
        let g = TimeGrid::new(0.25, 1, 0.0).unwrap();
        let s = ExactSampler::new(g, h(0.3)).unwrap();
        assert!((s.factor[(0, 0)] - 0.25f64.powf(0.3)).abs() < 1e-14);
        let a = sample_fbm_exact(g, h(0.3), 2, 9).unwrap();
        let b = sample_fbm_exact(g, h(0.3), 2, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn brownian_case_returns_future() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let past = sample_past(&mut rng, 0.125, 4.0, 2).unwrap();
        let fut = sample_future(&mut rng, 0.125, 2.0, 2).unwrap();
        let b = fbm_from_wiener(&past, &fut, h(0.5)).unwrap();
        assert_eq!(b.values(), fut.values());
    }

    #[test]
    fn zero_noise_gives_zero_fbm() {
        let past = PastPath::zeros(0.125, 4.0, 1).unwrap();
        let fut = FuturePath::zeros(0.125, 2.0, 1).unwrap();
        let b = fbm_from_wiener(&past, &fut, h(0.3)).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn concat_at_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let past = sample_past(&mut rng, 0.25, 4.0, 1).unwrap();
        let fut = sample_future(&mut rng, 0.25, 2.0, 1).unwrap();
        assert_eq!(concat_pt(&past, &fut, 0.0).unwrap(), past);
        assert!(concat_pt(&past, &fut, 0.3).is_err());
    }

    #[test]
    fn shift_of_ramp_is_ramp() {
        let g = TimeGrid::backward(0.25, 4.0).unwrap();
        let ramp: Vec<f64> = g.times().collect();
        let w = PastPath::new(g, 1, ramp).unwrap();
        let s = shift_theta(&w, 1.0).unwrap();
        for (t, v) in s.grid().times().zip(s.values()) {
            assert!((t - v).abs() < 1e-15);
        }
    }

    #[test]
    fn concat_then_shift_recovers_past() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let past = sample_past(&mut rng, 0.125, 8.0, 2).unwrap();
        let fut = sample_future(&mut rng, 0.125, 3.0, 2).unwrap();
        let back = shift_theta(&concat_pt(&past, &fut, 3.0).unwrap(), 3.0).unwrap();
        let offset = past.values().len() - back.values().len();
        for (a, b) in back.values().iter().zip(&past.values()[offset..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_single_step() {
        let dt = 0.125;
        let w = PastPath::new(TimeGrid::backward(dt, dt).unwrap(), 1, vec![-1.0, 0.0]).unwrap();
        let hv = h(0.3);
        let expect = 1.0 / (dt.powf(0.35) * (1.0 + dt).sqrt());
        assert!((holder_norm(&w, hv) - expect).abs() < 1e-14);
        assert_eq!(holder_norm(&PastPath::zeros(dt, 1.0, 1).unwrap(), hv), 0.0);
    }
}
