use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift family, applied coordinate by coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftKind {
    /// `x - x^3`.
    DoubleWell,
    /// `-rate * x`.
    Linear { rate: f64 },
    /// `sum_i coeffs[i] x^i`, ascending powers.
    CustomPolynomial { coeffs: Vec<f64> },
}

/// Drift `f` with its dissipativity constants: for all `x, y`,
/// `<f(x) - f(y), x - y> <= min(c1 - c2 |x-y|^2, c3 |x-y|^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub dim: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `sqrt(c1 (c2 + c3))`.
    pub c4: f64,
    pub growth_n: usize,
    pub globally_lipschitz: bool,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_deriv(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| i as f64 * c)
        .collect()
}

fn trim(coeffs: &[f64]) -> Vec<f64> {
    let mut v = coeffs.to_vec();
    while v.len() > 1 && *v.last().unwrap() == 0.0 {
        v.pop();
    }
    v
}

/// `c2` minimising the admissible distance `1 + (1 + c4) / c2`, with
/// `c1` given as a function of `c2`.
fn optimise_c2(c1_of: impl Fn(f64) -> f64, c3: f64) -> f64 {
    let dist = |c2: f64| 1.0 + (1.0 + (c1_of(c2) * (c2 + c3)).sqrt()) / c2;
    let (mut lo, mut hi) = (0.01_f64.ln(), 100.0_f64.ln());
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if dist(a.exp()) < dist(b.exp()) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let c2 = (0.5 * (lo + hi)).exp();
    // Two decimals keep configuration files readable.
    (c2 * 100.0).round() / 100.0
}

/// Search box for a polynomial: all real critical behaviour lies inside.
fn search_radius(coeffs: &[f64]) -> f64 {
    let lead = coeffs.last().unwrap().abs();
    2.0 * (1.0 + coeffs[..coeffs.len() - 1].iter().map(|c| c.abs() / lead).sum::<f64>())
}

/// `sup_{x,y} (x-y)(p(x)-p(y)) + c2 (x-y)^2` on a dense grid, with a
/// relative safety margin.
fn one_dim_c1(coeffs: &[f64], c2: f64, radius: f64) -> f64 {
    const N: usize = 601;
    let xs: Vec<f64> = (0..N)
        .map(|i| -radius + 2.0 * radius * i as f64 / (N - 1) as f64)
        .collect();
    let ps: Vec<f64> = xs.iter().map(|&x| poly_eval(coeffs, x)).collect();
    let mut best = 0.0_f64;
    for i in 0..N {
        for j in 0..i {
            let r = xs[i] - xs[j];
            best = best.max(r * (ps[i] - ps[j]) + c2 * r * r);
        }
    }
    1.02 * best + 1e-9
}

impl DriftSpec {
    /// `x - x^3` per coordinate. Since `x^2 + xy + y^2 >= (x-y)^2 / 4`,
    /// each coordinate contributes at most `r^2 - r^4/4`, giving `c3 = 1`
    /// and `c1 = n (1 + c2)^2`.
    pub fn double_well(dim: usize) -> Result<Self> {
        let n = dim as f64;
        let c1_of = |c2: f64| n * (1.0 + c2).powi(2);
        let c2 = optimise_c2(c1_of, 1.0);
        Self::with_constants(DriftKind::DoubleWell, dim, c1_of(c2), c2, 1.0)
    }

    /// `-rate * x`: `c2 = rate`; `c1` and `c3` only need to be positive and
    /// are set to 1.
    pub fn linear(dim: usize, rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Config(format!("linear drift rate must be positive, got {rate}")));
        }
        Self::with_constants(DriftKind::Linear { rate }, dim, 1.0, rate, 1.0)
    }

    /// Polynomial per coordinate, odd degree at least 3 with a negative
    /// leading coefficient. Constants come from a dense-grid search.
    pub fn custom_polynomial(dim: usize, coeffs: &[f64]) -> Result<Self> {
        let coeffs = trim(coeffs);
        let deg = coeffs.len() - 1;
        if deg < 3 || deg % 2 == 0 || *coeffs.last().unwrap() >= 0.0 {
            return Err(Error::Config(
                "custom polynomial needs odd degree >= 3 and a negative leading coefficient".into(),
            ));
        }
        let radius = search_radius(&coeffs);
        let d = poly_deriv(&coeffs);
        let sup_deriv = (0..=20_000)
            .map(|i| poly_eval(&d, -radius + 2.0 * radius * i as f64 / 20_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let c3 = (sup_deriv.abs() * 0.02 + sup_deriv).max(1e-3);
        let n = dim as f64;
        let c1_of = |c2: f64| n * one_dim_c1(&coeffs, c2, radius);
        let c2 = optimise_c2(&c1_of, c3);
        let c1 = c1_of(c2);
        Self::with_constants(DriftKind::CustomPolynomial { coeffs }, dim, c1, c2, c3)
    }

    /// Explicit constants; the dissipativity inequality is spot-checked on
    /// random pairs.
    pub fn with_constants(kind: DriftKind, dim: usize, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("drift dimension must be positive".into()));
        }
        for (name, c) in [("c1", c1), ("c2", c2), ("c3", c3)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {c}")));
            }
        }
        let growth_n = match &kind {
            DriftKind::DoubleWell => 3,
            DriftKind::Linear { .. } => 1,
            DriftKind::CustomPolynomial { coeffs } => coeffs.len() - 1,
        };
        let spec = Self {
            kind,
            dim,
            c1,
            c2,
            c3,
            c4: (c1 * (c2 + c3)).sqrt(),
            growth_n,
            globally_lipschitz: growth_n <= 1,
        };
        spec.spot_check(2000)?;
        Ok(spec)
    }

    fn spot_check(&self, pairs: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let scale = match &self.kind {
            DriftKind::CustomPolynomial { coeffs } => search_radius(coeffs),
            _ => 4.0,
        };
        let mut fx = vec![0.0; self.dim];
        let mut fy = vec![0.0; self.dim];
        for _ in 0..pairs {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-scale..scale)).collect();
            let y: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-scale..scale)).collect();
            self.eval(&x, &mut fx);
            self.eval(&y, &mut fy);
            let mut lhs = 0.0;
            let mut r2 = 0.0;
            for i in 0..self.dim {
                lhs += (fx[i] - fy[i]) * (x[i] - y[i]);
                r2 += (x[i] - y[i]).powi(2);
            }
            let rhs = (self.c1 - self.c2 * r2).min(self.c3 * r2);
            if lhs > rhs + 1e-9 * (1.0 + rhs.abs()) {
                return Err(Error::Config(format!(
                    "drift constants violated at x = {x:?}, y = {y:?}: {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }

    /// Writes `f(x)` into `out`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            DriftKind::DoubleWell => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = v - v * v * v;
                }
            }
            DriftKind::Linear { rate } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = -rate * v;
                }
            }
            DriftKind::CustomPolynomial { coeffs } => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = poly_eval(coeffs, v);
                }
            }
        }
    }

    /// Largest initial distance for which a hitting attempt is allowed.
    pub fn admissible_distance(&self) -> f64 {
        1.0 + (1.0 + self.c4) / self.c2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_constants() {
        let d = DriftSpec::double_well(1).unwrap();
        assert_eq!(d.c2, 3.0);
        assert_eq!(d.c1, 16.0);
        assert_eq!(d.c4, 8.0);
        assert_eq!(d.admissible_distance(), 4.0);
    }

    #[test]
    fn c4_is_exact() {
        let d = DriftSpec::double_well(2).unwrap();
        assert_eq!(d.c4, (d.c1 * (d.c2 + d.c3)).sqrt());
    }

    #[test]
    fn bad_constants_rejected() {
        assert!(DriftSpec::with_constants(DriftKind::DoubleWell, 1, 1.0, 3.0, 1.0).is_err());
        assert!(DriftSpec::with_constants(DriftKind::DoubleWell, 1, 16.0, 3.0, 0.5).is_err());
    }

    #[test]
    fn custom_polynomial_matches_double_well_scale() {
        let p = DriftSpec::custom_polynomial(1, &[0.0, 1.0, 0.0, -1.0]).unwrap();
        let d = DriftSpec::double_well(1).unwrap();
        assert!(p.c3 >= 1.0 && p.c3 < 1.1);
        assert!((p.admissible_distance() / d.admissible_distance() - 1.0).abs() < 0.05);
        assert!(DriftSpec::custom_polynomial(1, &[0.0, 1.0, 1.0]).is_err());
        assert!(DriftSpec::custom_polynomial(1, &[0.0, 1.0, 0.0, 1.0]).is_err());
    }
}
