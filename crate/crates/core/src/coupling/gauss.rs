use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Outcome of one draw from the shifted Gaussian coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussDraw {
    pub x: f64,
    pub y: f64,
    /// `y = x + a`.
    pub bound: bool,
}

/// Truncation level `max(4b, 2 ln(8/b))`.
pub fn coupling_radius(b: f64) -> f64 {
    (4.0 * b).max(2.0 * (8.0 / b).ln())
}

/// Couples two standard normals so that `y = x + a` with probability at
/// least `1 - b` (for `b <= 1`), reflecting `x` otherwise. Requires
/// `b >= |a|` and `b > 0`.
pub fn gaussian_coupling_1d<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<GaussDraw> {
    if !(b > 0.0 && b.is_finite()) || !(a.abs() <= b) {
        return Err(Error::InvalidArgument(format!(
            "gaussian coupling needs b > 0 and b >= |a|, got a = {a}, b = {b}"
        )));
    }
    let half = 0.5 * coupling_radius(b);
    let x: f64 = rng.sample(StandardNormal);
    let u: f64 = rng.random();
    if x.abs() <= half && (x + a).abs() <= half {
        // phi(x + a) / phi(x)
        let ratio = (-a * x - 0.5 * a * a).exp();
        if u <= ratio.min(1.0) {
            return Ok(GaussDraw { x, y: x + a, bound: true });
        }
    }
    let y = if x.abs() <= half { -x } else { x };
    Ok(GaussDraw { x, y, bound: a == 0.0 && y == x })
}
