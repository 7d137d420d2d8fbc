//! Pathwise solutions of `dx = f(x) dt + sigma dB` driven by a sampled
//! fractional path that is linear between grid points.

mod diffusion;
mod drift;

pub use diffusion::DiffusionMatrix;
pub use drift::{DriftKind, DriftSpec};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fracops::DriftSignal;
use crate::noise::{round_up, FbmPath, Hurst, TimeGrid};

/// Runge–Kutta substeps per grid cell.
pub const DEFAULT_SUBSTEPS: usize = 2;

/// Classical RK4 for `x' = f(x) + v` with `v` constant over the cell.
#[derive(Clone, Debug)]
pub struct CellStepper {
    drift: DriftSpec,
    substeps: usize,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl CellStepper {
    pub fn new(drift: &DriftSpec, substeps: usize) -> Self {
        let n = drift.dim;
        Self {
            drift: drift.clone(),
            substeps: substeps.max(1),
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    pub fn drift(&self) -> &DriftSpec {
        &self.drift
    }

    fn rhs(&mut self, slot: usize, forcing: &[f64]) {
        let (drift, k, tmp) = (&self.drift, &mut self.k, &self.tmp);
        drift.eval(tmp, &mut k[slot]);
        for (a, b) in k[slot].iter_mut().zip(forcing) {
            *a += b;
        }
    }

    /// Advances `x` over one cell of length `dt`; `false` if the state
    /// stopped being finite.
    pub fn advance(&mut self, x: &mut [f64], forcing: &[f64], dt: f64) -> bool {
        let h = dt / self.substeps as f64;
        let n = x.len();
        for _ in 0..self.substeps {
            self.tmp.copy_from_slice(x);
            self.rhs(0, forcing);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * self.k[0][i];
            }
            self.rhs(1, forcing);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * self.k[1][i];
            }
            self.rhs(2, forcing);
            for i in 0..n {
                self.tmp[i] = x[i] + h * self.k[2][i];
            }
            self.rhs(3, forcing);
            for i in 0..n {
                x[i] += h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
            }
        }
        x.iter().all(|v| v.is_finite())
    }
}

/// Solution sampled on the grid points of the driving path.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.point(self.grid.n_steps())
    }
}

/// Solves over the cells of a driving path given by its increments
/// (row-major), optionally with an extra per-cell drift added through
/// `sigma`. Used directly by the coupling chain.
pub fn solve_increments(
    x0: &[f64],
    increments: &[f64],
    dt: f64,
    t0: f64,
    stepper: &mut CellStepper,
    sigma: &DiffusionMatrix,
    extra: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let dim = x0.len();
    let n = increments.len() / dim;
    let mut out = Vec::with_capacity((n + 1) * dim);
    out.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut drive = vec![0.0; dim];
    let mut forcing = vec![0.0; dim];
    for k in 0..n {
        for c in 0..dim {
            drive[c] = increments[k * dim + c] / dt;
            if let Some(g) = extra {
                drive[c] += g[k * dim + c];
            }
        }
        sigma.apply(&drive, &mut forcing);
        if !stepper.advance(&mut x, &forcing, dt) {
            return Err(Error::BlowUp { t: t0 + (k + 1) as f64 * dt });
        }
        out.extend_from_slice(&x);
    }
    Ok(out)
}

/// `Phi_T(x0, b)` on the grid of `noise`.
pub fn solve_path(
    x0: &[f64],
    noise: &FbmPath,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    extra_drift: Option<&DriftSignal>,
) -> Result<Trajectory> {
    let dim = noise.dim();
    if x0.len() != dim || drift.dim != dim || sigma.dim() != dim {
        return Err(Error::GridMismatch("state, noise, drift and sigma dimensions differ".into()));
    }
    if let Some(g) = extra_drift {
        if g.grid() != noise.grid() || g.dim() != dim {
            return Err(Error::GridMismatch("extra drift and noise grids differ".into()));
        }
    }
    let grid = *noise.grid();
    let mut stepper = CellStepper::new(drift, DEFAULT_SUBSTEPS);
    let values = solve_increments(
        x0,
        &noise.increments(),
        grid.dt(),
        grid.origin(),
        &mut stepper,
        sigma,
        extra_drift.map(|g| g.values()),
    )?;
    Ok(Trajectory { grid, dim, values })
}

/// `max(ln(distance) / c2, 1)` rounded up to the grid.
pub fn contraction_wait_bound(distance: f64, drift: &DriftSpec, dt: f64) -> f64 {
    let t = if distance > 0.0 { distance.ln() / drift.c2 } else { f64::NEG_INFINITY };
    round_up(dt, t.max(1.0))
}

/// Second moment of the auxiliary process `dy = -y dt + sigma dB`, `y_0 = 0`,
/// and its uniform bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuVariance {
    pub variance: f64,
    pub bound: f64,
}

/// `E|y_t|^2 = 2H tr(sigma sigma^T) e^{-t} int_0^t s^{2H-1} cosh(t-s) ds`
/// by quadrature, with the bound `Gamma(2H+1) tr(sigma sigma^T)`.
pub fn ou_variance_bound(h: Hurst, sigma: &DiffusionMatrix, t: f64) -> OuVariance {
    let tr = sigma.trace_sst();
    let bound = gamma(2.0 * h.value() + 1.0) * tr;
    if t <= 0.0 {
        return OuVariance { variance: 0.0, bound };
    }
    // e^{-t} cosh(t-s) written without overflow.
    let two_h = 2.0 * h.value();
    let kern = |s: f64| 0.5 * ((-s).exp() + (s - 2.0 * t).exp());
    let panel = |a: f64, b: f64| {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        crate::fracops::GL8
            .iter()
            .map(|&(x, w)| {
                let s = mid + half * x;
                half * w * two_h * s.powf(two_h - 1.0) * kern(s)
            })
            .sum::<f64>()
    };
    // Geometric panels resolve the power singularity at 0, uniform ones
    // the exponentials.
    let split = t.min(0.5);
    let mut lo = split * 2f64.powi(-60);
    let mut acc = lo.powf(two_h) * kern(0.0);
    while lo < split {
        acc += panel(lo, 2.0 * lo);
        lo *= 2.0;
    }
    let n = ((t - split) / 0.25).ceil() as usize;
    for i in 0..n {
        let a = split + (t - split) * i as f64 / n as f64;
        let b = split + (t - split) * (i + 1) as f64 / n as f64;
        acc += panel(a, b);
    }
    OuVariance {
        variance: tr * acc,
        bound,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_fbm_exact, FbmPath};

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    fn zero_drift_spec() -> DriftSpec {
        DriftSpec::linear(1, 1e-300).unwrap()
    }

    #[test]
    fn tiny_drift_reproduces_noise() {
        let grid = TimeGrid::forward(1.0 / 32.0, 2.0).unwrap();
        let b = sample_fbm_exact(grid, h(0.3), 1, 3).unwrap();
        let x = solve_path(&[0.5], &b, &zero_drift_spec(), &DiffusionMatrix::identity(1), None).unwrap();
        for i in 0..grid.n_points() {
            assert!((x.point(i)[0] - 0.5 - b.point(i)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_decay() {
        let dt = 1.0 / 256.0;
        let grid = TimeGrid::forward(dt, 2.0).unwrap();
        let b = FbmPath::new(grid, 1, vec![0.0; grid.n_points()], h(0.7)).unwrap();
        let x = solve_path(&[1.5], &b, &DriftSpec::linear(1, 1.0).unwrap(), &DiffusionMatrix::identity(1), None)
            .unwrap();
        for (i, t) in grid.times().enumerate() {
            assert!((x.point(i)[0] - 1.5 * (-t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn wait_bound_examples() {
        let d = DriftSpec::with_constants(DriftKind::Linear { rate: 1.0 }, 1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(contraction_wait_bound(std::f64::consts::E.powi(2), &d, 1.0 / 16.0), 2.0);
        assert_eq!(contraction_wait_bound(0.5, &d, 1.0 / 16.0), 1.0);
        assert_eq!(contraction_wait_bound(0.0, &d, 1.0 / 16.0), 1.0);
        let d2 = DriftSpec::with_constants(DriftKind::Linear { rate: 2.0 }, 1, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(contraction_wait_bound(10f64.exp(), &d2, 1.0 / 16.0), 5.0);
        assert_eq!(contraction_wait_bound(3f64.exp(), &d2, 1.0 / 4.0), 1.5);
    }

    #[test]
    fn ou_variance_brownian_closed_form() {
        let s = DiffusionMatrix::identity(1);
        let v = ou_variance_bound(h(0.5), &s, 0.0);
        assert_eq!(v.variance, 0.0);
        assert!((v.bound - 1.0).abs() < 1e-12);
        for t in [0.5, 2.0, 7.0] {
            let v = ou_variance_bound(h(0.5), &s, t);
            assert!((v.variance - 0.5 * (1.0 - (-2.0 * t).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn ou_variance_limit() {
        let s = DiffusionMatrix::identity(2);
        for hv in [0.2, 0.7] {
            let v = ou_variance_bound(h(hv), &s, 60.0);
            assert!((v.variance / (0.5 * v.bound) - 1.0).abs() < 1e-6, "H={hv}");
        }
    }

    fn solve_with(substeps: usize, b: &FbmPath, drift: &DriftSpec) -> Vec<f64> {
        let mut st = CellStepper::new(drift, substeps);
        solve_increments(&[0.3], &b.increments(), b.grid().dt(), 0.0, &mut st, &DiffusionMatrix::identity(1), None)
            .unwrap()
    }

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn double_well_matches_half_step_oracle() {
        let grid = TimeGrid::forward(1.0 / 32.0, 4.0).unwrap();
        let b = sample_fbm_exact(grid, h(0.3), 1, 11).unwrap();
        let d = DriftSpec::double_well(1).unwrap();
        let coarse = solve_with(DEFAULT_SUBSTEPS, &b, &d);
        let fine = solve_with(2 * DEFAULT_SUBSTEPS, &b, &d);
        assert!(sup_diff(&coarse, &fine) < 1e-5);
    }

    #[test]
    fn fourth_order_in_substep() {
        let grid = TimeGrid::forward(0.25, 4.0).unwrap();
        let b = FbmPath::new(grid, 1, grid.times().map(|t| (2.0 * t).sin()).collect(), h(0.7)).unwrap();
        let d = DriftSpec::double_well(1).unwrap();
        let reference = solve_with(256, &b, &d);
        let e1 = sup_diff(&solve_with(2, &b, &d), &reference);
        let e2 = sup_diff(&solve_with(4, &b, &d), &reference);
        let slope = (e1 / e2).log2();
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn gronwall_contraction() {
        let grid = TimeGrid::forward(1.0 / 32.0, 4.0).unwrap();
        let d = DriftSpec::double_well(1).unwrap();
        let s = DiffusionMatrix::identity(1);
        for seed in 0..20 {
            let b = sample_fbm_exact(grid, h(0.7), 1, seed).unwrap();
            let x = solve_path(&[-1.5], &b, &d, &s, None).unwrap();
            let y = solve_path(&[2.0], &b, &d, &s, None).unwrap();
            for (i, t) in grid.times().enumerate() {
                let rho = (x.point(i)[0] - y.point(i)[0]).abs();
                let e = (-d.c2 * t).exp();
                let bound = 3.5 * e + d.c4 / d.c2 * (1.0 - e);
                assert!(rho <= bound + 1e-9, "seed {seed} t {t}: {rho} > {bound}");
            }
        }
    }
}
