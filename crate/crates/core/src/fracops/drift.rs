use serde::{Deserialize, Serialize};

use super::conv;
use super::kernel::{kernel, unit_coeff, unit_partial};
use super::operators::{constants, OperatorConstants};
use crate::error::{Error, Result};
use crate::noise::{steps_for, Hurst, PastPath, TimeGrid, DEFAULT_PAST_HORIZON};

/// Piecewise-constant vector signal, one value per grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSignal {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl DriftSignal {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != grid.n_steps() * dim {
            return Err(Error::GridMismatch(format!(
                "drift signal needs {} values, got {}",
                grid.n_steps() * dim,
                values.len()
            )));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            dim,
            values: vec![0.0; grid.n_steps() * dim],
        }
    }

    /// Samples `f` at cell midpoints.
    pub fn from_fn(grid: TimeGrid, dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.n_steps() * dim);
        for k in 0..grid.n_steps() {
            let v = f(grid.time(k) + 0.5 * grid.dt());
            values.extend_from_slice(&v[..dim]);
        }
        Self { grid, dim, values }
    }

    /// `(dw_y - dw_x) / dt` cell by cell.
    pub fn from_wiener_difference(w_x: &PastPath, w_y: &PastPath) -> Result<Self> {
        if w_x.grid() != w_y.grid() || w_x.dim() != w_y.dim() {
            return Err(Error::GridMismatch("pasts differ in grid or dim".into()));
        }
        let dt = w_x.dt();
        let values = w_y
            .increments()
            .iter()
            .zip(w_x.increments())
            .map(|(a, b)| (a - b) / dt)
            .collect();
        Self::new(*w_x.grid(), w_x.dim(), values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn cell_norm(&self, k: usize) -> f64 {
        self.cell(k).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch("drift signals differ in grid or dim".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.grid, self.dim, values)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dt()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.grid.n_steps())
            .map(|k| self.cell_norm(k))
            .fold(0.0, f64::max)
    }
}

/// Which form of the transfer relation to use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TransferMode {
    /// Convolution with the power kernel over the whole signal.
    General,
    /// Input vanishes after `t0`; the output from `t0` on uses the tail kernel.
    VanishingAfter(f64),
    /// Input vanishes before `t0`; boundary value plus jumps.
    VanishingBefore(f64),
}

/// Operator constants used by the drift transfers on a grid with step `dt`.
pub fn reference_constants(h: Hurst, dt: f64) -> OperatorConstants {
    let lags = steps_for(dt, DEFAULT_PAST_HORIZON).expect("dyadic step divides the horizon");
    constants(h, dt, lags)
}

fn first_cell_at(g: &DriftSignal, t0: f64) -> Result<usize> {
    let k = steps_for(g.grid.dt(), t0 - g.grid.origin())?;
    if k > g.grid.n_steps() {
        return Err(Error::ModeViolation(format!("t0 = {t0} outside the signal grid")));
    }
    Ok(k)
}

fn check_zero(g: &DriftSignal, cells: std::ops::Range<usize>, what: &str) -> Result<()> {
    for k in cells {
        if g.cell(k).iter().any(|&v| v != 0.0) {
            return Err(Error::ModeViolation(format!(
                "signal is non-zero in cell {k} but declared {what}"
            )));
        }
    }
    Ok(())
}

/// `c * d/dt int (t-s)^p g(s) ds` with `p = kernel_h - 1/2`, cell averaged.
fn transfer(g: &DriftSignal, kernel_h: Hurst, c: f64, mode: TransferMode) -> Result<DriftSignal> {
    let n = g.grid.n_steps();
    let dim = g.dim;
    let dt = g.grid.dt();
    let p = kernel_h.kernel_exponent();
    let scale = dt.powf(p);
    let mut out = vec![0.0; n * dim];
    let general = |out: &mut [f64]| {
        let k = kernel(kernel_h, dt, n);
        let y = conv::causal_rows(k.coeffs(), &g.values, dim, n);
        for (o, v) in out.iter_mut().zip(y) {
            *o = c * v;
        }
    };
    match mode {
        TransferMode::General => general(&mut out),
        TransferMode::VanishingAfter(t0) => {
            let k0 = first_cell_at(g, t0)?;
            check_zero(g, k0..n, "vanishing after t0")?;
            general(&mut out);
            // From t0 on, average over cell k of the tail kernel
            // p (t-s)^(p-1) integrated over source cell j.
            for k in k0..n {
                for comp in 0..dim {
                    let mut acc = 0.0;
                    for j in 0..k0 {
                        acc += scale * unit_coeff(p, k - j) * g.values[j * dim + comp];
                    }
                    out[k * dim + comp] = c * acc;
                }
            }
        }
        TransferMode::VanishingBefore(t0) => {
            let k0 = first_cell_at(g, t0)?;
            check_zero(g, 0..k0, "vanishing before t0")?;
            // Jumps of the piecewise-constant input, starting with its value
            // at t0, each feeding (t - t_j)^p averaged over the output cell.
            for comp in 0..dim {
                let mut jumps = vec![0.0; n];
                let mut prev = 0.0;
                for j in k0..n {
                    let v = g.values[j * dim + comp];
                    jumps[j] = v - prev;
                    prev = v;
                }
                for k in k0..n {
                    let mut acc = 0.0;
                    for (j, &jump) in jumps.iter().enumerate().take(k + 1).skip(k0) {
                        if jump != 0.0 {
                            acc += jump * scale * unit_partial(p, (k - j) as i64);
                        }
                    }
                    out[k * dim + comp] = c * acc;
                }
            }
        }
    }
    DriftSignal::new(g.grid, dim, out)
}

/// Fractional-level drift induced by a Wiener-level drift.
pub fn drift_w_to_b(g_w: &DriftSignal, h: Hurst, mode: TransferMode) -> Result<DriftSignal> {
    let c = reference_constants(h, g_w.grid.dt()).w_to_b_constant();
    transfer(g_w, h, c, mode)
}

/// Wiener-level drift needed to realise a fractional-level drift.
pub fn drift_b_to_w(g_b: &DriftSignal, h: Hurst, mode: TransferMode) -> Result<DriftSignal> {
    let c = reference_constants(h, g_b.grid.dt()).b_to_w_constant();
    transfer(g_b, h.dual(), c, mode)
}

/// Exact discrete inverse of [`drift_w_to_b`] in general mode.
pub fn drift_b_to_w_exact(g_b: &DriftSignal, h: Hurst) -> Result<DriftSignal> {
    let n = g_b.grid.n_steps();
    let dt = g_b.grid.dt();
    let c = reference_constants(h, dt).w_to_b_constant();
    let b = kernel(h, dt, n).inverse(n);
    let y = conv::causal_rows(&b, &g_b.values, g_b.dim, n);
    DriftSignal::new(g_b.grid, g_b.dim, y.into_iter().map(|v| v / c).collect())
}
