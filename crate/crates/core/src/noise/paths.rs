use serde::{Deserialize, Serialize};

use super::grid::{Hurst, TimeGrid};
use crate::error::{Error, Result};

/// Row-major samples: `values[i * dim + c]` is coordinate `c` at grid point `i`.
fn check_len(grid: &TimeGrid, dim: usize, values: &[f64]) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if values.len() != grid.n_points() * dim {
        return Err(Error::GridMismatch(format!(
            "expected {} samples ({} points x {} dims), got {}",
            grid.n_points() * dim,
            grid.n_points(),
            dim,
            values.len()
        )));
    }
    Ok(())
}

fn differences(values: &[f64], dim: usize) -> Vec<f64> {
    values
        .windows(2 * dim)
        .step_by(dim)
        .flat_map(|w| (0..dim).map(move |c| w[dim + c] - w[c]))
        .collect()
}

/// Wiener past on `[-T_past, 0]`, pinned to zero at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PastPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl PastPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, dim, &values)?;
        if grid.end().abs() > 1e-12 * grid.dt() {
            return Err(Error::InvalidGrid(format!(
                "past grid must end at 0, ends at {}",
                grid.end()
            )));
        }
        let last = &values[grid.n_steps() * dim..];
        if last.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "past path must vanish at time 0".into(),
            ));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(dt: f64, horizon: f64, dim: usize) -> Result<Self> {
        let grid = TimeGrid::backward(dt, horizon)?;
        Self::new(grid, dim, vec![0.0; grid.n_points() * dim])
    }

    /// Builds the path from its `n_steps * dim` cell increments, oldest first.
    pub fn from_increments(dt: f64, dim: usize, increments: &[f64]) -> Result<Self> {
        if dim == 0 || increments.is_empty() || increments.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "increment length must be a positive multiple of dim".into(),
            ));
        }
        let n = increments.len() / dim;
        let grid = TimeGrid::new(dt, n, -(n as f64) * dt)?;
        let mut values = vec![0.0; (n + 1) * dim];
        for i in (0..n).rev() {
            for c in 0..dim {
                values[i * dim + c] = values[(i + 1) * dim + c] - increments[i * dim + c];
            }
        }
        Ok(Self { grid, dim, values })
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

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.duration()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn increments(&self) -> Vec<f64> {
        differences(&self.values, self.dim)
    }

    /// Pointwise `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &PastPath, b: f64) -> Result<PastPath> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(Error::GridMismatch("past paths differ in grid or dim".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(PastPath { grid: self.grid, dim: self.dim, values })
    }

    pub fn scaled(&self, c: f64) -> PastPath {
        PastPath {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

/// Wiener future on `[0, T]`, starting from zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuturePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl FuturePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, dim, &values)?;
        if grid.origin() != 0.0 {
            return Err(Error::InvalidGrid("future grid must start at 0".into()));
        }
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "future path must start from zero".into(),
            ));
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(dt: f64, duration: f64, dim: usize) -> Result<Self> {
        let grid = TimeGrid::forward(dt, duration)?;
        Self::new(grid, dim, vec![0.0; grid.n_points() * dim])
    }

    pub fn from_increments(dt: f64, dim: usize, increments: &[f64]) -> Result<Self> {
        if dim == 0 || increments.is_empty() || increments.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "increment length must be a positive multiple of dim".into(),
            ));
        }
        let n = increments.len() / dim;
        let grid = TimeGrid::new(dt, n, 0.0)?;
        let mut values = vec![0.0; (n + 1) * dim];
        for i in 0..n {
            for c in 0..dim {
                values[(i + 1) * dim + c] = values[i * dim + c] + increments[i * dim + c];
            }
        }
        Ok(Self { grid, dim, values })
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

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.duration()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn increments(&self) -> Vec<f64> {
        differences(&self.values, self.dim)
    }
}

/// Sampled fractional Brownian motion. The value at the grid origin is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FbmPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    hurst: Hurst,
}

impl FbmPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>, hurst: Hurst) -> Result<Self> {
        check_len(&grid, dim, &values)?;
        if values[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("fBm path must start from zero".into()));
        }
        Ok(Self { grid, dim, values, hurst })
    }

    /// Path on `[0, n * dt]` from cell increments.
    pub fn from_increments(dt: f64, dim: usize, increments: &[f64], hurst: Hurst) -> Result<Self> {
        let future = FuturePath::from_increments(dt, dim, increments)?;
        Ok(Self {
            grid: future.grid,
            dim,
            values: future.values,
            hurst,
        })
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

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn increments(&self) -> Vec<f64> {
        differences(&self.values, self.dim)
    }
}
