use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a duration is a whole
/// number of grid steps.
const ALIGN_TOL: f64 = 1e-9;

/// Hurst parameter of a fractional Brownian motion, `0 < h < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `H - 1/2`, the exponent of the moving-average kernel.
    pub fn kernel_exponent(self) -> f64 {
        self.0 - 0.5
    }

    /// The dual exponent `1 - H` used by the inverse operator.
    pub fn dual(self) -> Self {
        Self(1.0 - self.0)
    }

    /// Brownian case. The solver accepts it; the coupling construction
    /// does not.
    pub fn excluded_by_theory(self) -> bool {
        self.0 == 0.5
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

/// Uniform grid `origin, origin + dt, ..., origin + n_steps * dt` with a
/// dyadic step `dt = 2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
    origin: f64,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize, origin: f64) -> Result<Self> {
        check_dyadic(dt)?;
        if n_steps == 0 {
            return Err(Error::InvalidGrid("grid needs at least one step".into()));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite origin {origin}")));
        }
        Ok(Self { dt, n_steps, origin })
    }

    /// Grid covering `[0, duration]`.
    pub fn forward(dt: f64, duration: f64) -> Result<Self> {
        let n = steps_for(dt, duration)?;
        Self::new(dt, n, 0.0)
    }

    /// Grid covering `[-horizon, 0]`.
    pub fn backward(dt: f64, horizon: f64) -> Result<Self> {
        let n = steps_for(dt, horizon)?;
        Self::new(dt, n, -(n as f64) * dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_points(&self) -> usize {
        self.n_steps + 1
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn end(&self) -> f64 {
        self.origin + self.n_steps as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points()).map(move |i| self.time(i))
    }

    /// Both grids use the same step.
    pub fn same_step(&self, other: &TimeGrid) -> bool {
        self.dt == other.dt
    }
}

/// `dt` must be `2^-k` for an integer `k >= 0`.
pub fn check_dyadic(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidGrid(format!("dt = {dt} is not in (0, 1]")));
    }
    let k = -dt.log2();
    if (k - k.round()).abs() > 1e-12 {
        return Err(Error::InvalidGrid(format!("dt = {dt} is not a power of 1/2")));
    }
    Ok(())
}

/// Number of grid steps in `duration`; errors unless the duration is a
/// whole number of steps.
pub fn steps_for(dt: f64, duration: f64) -> Result<usize> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::NotGridAligned { t: duration, dt });
    }
    let n = duration / dt;
    let r = n.round();
    if (n - r).abs() > ALIGN_TOL * n.max(1.0) {
        return Err(Error::NotGridAligned { t: duration, dt });
    }
    Ok(r as usize)
}

/// Smallest whole number of steps covering `duration`.
pub fn steps_ceil(dt: f64, duration: f64) -> usize {
    let n = duration / dt;
    let r = n.round();
    if (n - r).abs() <= ALIGN_TOL * n.max(1.0) {
        r as usize
    } else {
        n.ceil() as usize
    }
}

/// `duration` rounded up to a multiple of `dt`.
pub fn round_up(dt: f64, duration: f64) -> f64 {
    steps_ceil(dt, duration) as f64 * dt
}
