use serde::{Deserialize, Serialize};

use super::drift::{reference_constants, DriftSignal};
use crate::error::{Error, Result};
use crate::noise::{steps_ceil, Hurst, TimeGrid};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

pub(crate) const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Weight exponent of the norm `int (1+t)^(2 alpha) |g|^2 dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaExponent(f64);

impl AlphaExponent {
    /// Requires `0 < alpha < min(1/2, H)`.
    pub fn new(alpha: f64, h: Hurst) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha < h.value().min(0.5) {
            Ok(Self(alpha))
        } else {
            Err(Error::Config(format!(
                "alpha = {alpha} must lie in (0, min(1/2, H)) with H = {}",
                h.value()
            )))
        }
    }

    /// No coupling to a Hurst parameter; only `0 < alpha < 1/2` is checked.
    pub fn unchecked(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha < 0.5, "alpha outside (0, 1/2)");
        Self(alpha)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Weighted norm `(int (1+t)^(2 alpha) |g(t)|^2 dt)^(1/2)` with time
/// measured from the start of the grid, exact for piecewise-constant `g`.
pub fn alpha_norm(g: &DriftSignal, alpha: AlphaExponent) -> f64 {
    let q = 2.0 * alpha.value() + 1.0;
    let dt = g.grid().dt();
    let mut acc = 0.0;
    let mut lo = 1.0_f64.powf(q);
    for k in 0..g.grid().n_steps() {
        let hi = (1.0 + (k + 1) as f64 * dt).powf(q);
        let n2: f64 = g.cell(k).iter().map(|v| v * v).sum();
        acc += n2 * (hi - lo) / q;
        lo = hi;
    }
    acc.sqrt()
}

/// Pointwise evaluator of the future-influence kernel
/// `g2(t) = C int_0^t1 t^(1/2-H) (t2-s)^(H-1/2) / (t+t2-s) g1(s) ds`.
#[derive(Clone, Debug)]
pub struct FutureKernel {
    g1: DriftSignal,
    t2: f64,
    hurst: Hurst,
    constant: f64,
}

impl FutureKernel {
    pub fn new(g1: &DriftSignal, t1: f64, t2: f64, h: Hurst) -> Result<Self> {
        if !(t1 > 0.0 && t2 > 2.0 * t1) {
            return Err(Error::RatioPrecondition { t1, t2 });
        }
        if g1.grid().origin() != 0.0 || (g1.grid().end() - t1).abs() > 1e-9 * t1 {
            return Err(Error::InvalidArgument(format!(
                "g1 must live on [0, {t1}], got [{}, {}]",
                g1.grid().origin(),
                g1.grid().end()
            )));
        }
        let constant = reference_constants(h, g1.grid().dt()).g2_constant();
        Ok(Self {
            g1: g1.clone(),
            t2,
            hurst: h,
            constant,
        })
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `g2(t)` for `t > 0`, with Gauss–Legendre quadrature over each cell of `g1`.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let p = self.hurst.kernel_exponent();
        let dim = self.g1.dim();
        let dt = self.g1.grid().dt();
        let mut out = vec![0.0; dim];
        for j in 0..self.g1.grid().n_steps() {
            let v = self.g1.cell(j);
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mid = (j as f64 + 0.5) * dt;
            let w: f64 = GL8
                .iter()
                .map(|&(x, wt)| {
                    let s = mid + 0.5 * dt * x;
                    let u = self.t2 - s;
                    wt * u.powf(p) / (t + u)
                })
                .sum::<f64>()
                * 0.5
                * dt;
            for (o, &vc) in out.iter_mut().zip(v) {
                *o += w * vc;
            }
        }
        let f = self.constant * t.powf(-p);
        out.iter_mut().for_each(|o| *o *= f);
        out
    }

    /// `C int_0^t1 (t2-s)^(H-1/2) g1(s) ds`, the coefficient of the
    /// `t^(-1/2-H)` decay at large `t`.
    fn far_coefficient(&self) -> f64 {
        let p = self.hurst.kernel_exponent();
        let dt = self.g1.grid().dt();
        let mut acc = vec![0.0; self.g1.dim()];
        for j in 0..self.g1.grid().n_steps() {
            let mid = (j as f64 + 0.5) * dt;
            let w: f64 = GL4
                .iter()
                .map(|&(x, wt)| wt * (self.t2 - mid - 0.5 * dt * x).powf(p))
                .sum::<f64>()
                * 0.5
                * dt;
            for (a, &v) in acc.iter_mut().zip(self.g1.cell(j)) {
                *a += w * v;
            }
        }
        self.constant.abs() * acc.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// `g2` on a finite window together with the weighted-norm mass beyond it.
#[derive(Clone, Debug)]
pub struct FutureInfluence {
    pub signal: DriftSignal,
    /// Coefficient of the `t^(-1/2-H)` decay of `|g2|` at large `t`.
    far_coefficient: f64,
    window: f64,
    hurst: Hurst,
}

impl FutureInfluence {
    /// Squared weighted norm of `g2` beyond the window, from its
    /// `t^(-1/2-H)` asymptote.
    pub fn tail_norm_sq(&self, alpha: AlphaExponent) -> f64 {
        let e = 2.0 * alpha.value() - 2.0 * self.hurst.value();
        self.far_coefficient.powi(2) * self.window.powf(e) / (-e)
    }

    /// Weighted norm including the tail estimate.
    pub fn alpha_norm(&self, alpha: AlphaExponent) -> f64 {
        (alpha_norm(&self.signal, alpha).powi(2) + self.tail_norm_sq(alpha)).sqrt()
    }
}

/// Cell averages of `g2` on `[0, window]`, `window` defaulting to `16 t2`.
pub fn future_kernel_g2(
    g1: &DriftSignal,
    t1: f64,
    t2: f64,
    h: Hurst,
    window: Option<f64>,
) -> Result<FutureInfluence> {
    let fk = FutureKernel::new(g1, t1, t2, h)?;
    let dt = g1.grid().dt();
    let n = steps_ceil(dt, window.unwrap_or(16.0 * t2)).max(1);
    let grid = TimeGrid::new(dt, n, 0.0)?;
    let dim = g1.dim();
    let mut values = vec![0.0; n * dim];
    for k in 0..n {
        let mid = (k as f64 + 0.5) * dt;
        let mut acc = vec![0.0; dim];
        for &(x, wt) in &GL4 {
            let v = fk.eval(mid + 0.5 * dt * x);
            for (a, b) in acc.iter_mut().zip(v) {
                *a += 0.5 * wt * b;
            }
        }
        values[k * dim..(k + 1) * dim].copy_from_slice(&acc);
    }
    Ok(FutureInfluence {
        signal: DriftSignal::new(grid, dim, values)?,
        far_coefficient: fk.far_coefficient(),
        window: grid.end(),
        hurst: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> Hurst {
        Hurst::new(v).unwrap()
    }

    #[test]
    fn alpha_norm_closed_form() {
        let g = DriftSignal::new(TimeGrid::forward(0.25, 1.0).unwrap(), 1, vec![1.0; 4]).unwrap();
        let expect = ((2f64.powf(1.5) - 1.0) / 1.5).sqrt();
        assert!((alpha_norm(&g, AlphaExponent::unchecked(0.25)) - expect).abs() < 1e-12);
        assert!((expect - 1.10406).abs() < 1e-5);
    }

    #[test]
    fn alpha_exponent_bounds() {
        assert!(AlphaExponent::new(0.3, h(0.3)).is_err());
        assert!(AlphaExponent::new(0.25, h(0.3)).is_ok());
        assert!(AlphaExponent::new(0.5, h(0.7)).is_err());
    }

    #[test]
    fn ratio_precondition() {
        let g = DriftSignal::new(TimeGrid::forward(0.25, 1.0).unwrap(), 1, vec![1.0; 4]).unwrap();
        assert!(matches!(
            future_kernel_g2(&g, 1.0, 2.0, h(0.3), None),
            Err(Error::RatioPrecondition { .. })
        ));
    }

    #[test]
    fn linear_in_g1() {
        let grid = TimeGrid::forward(0.25, 1.0).unwrap();
        let a = DriftSignal::new(grid, 1, vec![1.0, 0.0, 2.0, -1.0]).unwrap();
        let b = DriftSignal::new(grid, 1, vec![0.5, 0.5, 0.0, 3.0]).unwrap();
        let ab = a.combine(2.0, &b, -3.0).unwrap();
        let ga = future_kernel_g2(&a, 1.0, 4.0, h(0.3), Some(8.0)).unwrap().signal;
        let gb = future_kernel_g2(&b, 1.0, 4.0, h(0.3), Some(8.0)).unwrap().signal;
        let gab = future_kernel_g2(&ab, 1.0, 4.0, h(0.3), Some(8.0)).unwrap().signal;
        let lin = ga.combine(2.0, &gb, -3.0).unwrap();
        for (x, y) in gab.values().iter().zip(lin.values()) {
            assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
        }
    }
}
