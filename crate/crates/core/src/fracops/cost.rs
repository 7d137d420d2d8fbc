//! Cost of a past discrepancy between two Wiener paths.
//!
//! For a past signal `g` the cost is
//! `sup_T |R_T g|_alpha + C_K int_{-inf}^0 (-s)^(H-3/2) |g(s)| ds` with
//! `(R_T g)(t) = C t^(1/2-H) int (T-s)^(H-1/2) / (t+T-s) |g(s)| ds`.
//! The supremum runs over the ladder `T = dt 2^j <= 4 * horizon`.

use serde::{Deserialize, Serialize};

use super::drift::{reference_constants, DriftSignal};
use super::future::{AlphaExponent, GL4, GL8};
use crate::noise::Hurst;

/// Cells closer to the present than this are integrated one by one.
const NEAR_CELLS: usize = 32;
/// Farther cells are merged into blocks of relative width at most `1/BLOCK_RATIO`.
const BLOCK_RATIO: usize = 32;

/// Non-negative cost, possibly infinite. Serialised as a number, or
/// `null` when infinite.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(into = "Option<f64>", from = "Option<f64>")]
pub struct CostValue(f64);

impl From<CostValue> for Option<f64> {
    fn from(c: CostValue) -> Self {
        c.finite()
    }
}

impl From<Option<f64>> for CostValue {
    fn from(v: Option<f64>) -> Self {
        Self(v.map_or(f64::INFINITY, |x| x.max(0.0)))
    }
}

impl CostValue {
    pub const ZERO: CostValue = CostValue(0.0);
    pub const INFINITE: CostValue = CostValue(f64::INFINITY);

    pub fn new(v: f64) -> Self {
        assert!(v >= 0.0, "cost must be non-negative");
        Self(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// `None` for the infinite sentinel.
    pub fn finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }
}

/// The two parts of the cost and the ladder point attaining the supremum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown {
    pub sup_term: f64,
    pub tail_term: f64,
    pub argmax_t: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> CostValue {
        CostValue::new(self.sup_term + self.tail_term)
    }
}

/// Point masses `(distance back from 0, mass)` representing `|g|`.
fn masses(g: &DriftSignal) -> Vec<(f64, f64)> {
    let n = g.grid().n_steps();
    let dt = g.grid().dt();
    let norm_back = |b: usize| g.cell_norm(n - 1 - b);
    let mut out = Vec::new();
    let near = NEAR_CELLS.min(n);
    for b in 0..near {
        let m = norm_back(b);
        if m == 0.0 {
            continue;
        }
        let mid = (b as f64 + 0.5) * dt;
        for &(x, w) in &GL8 {
            out.push((mid + 0.5 * dt * x, 0.5 * w * dt * m));
        }
    }
    let mut b = near;
    while b < n {
        let width = (b / BLOCK_RATIO).max(1);
        let end = (b + width).min(n);
        let mut mass = 0.0;
        let mut moment = 0.0;
        for c in b..end {
            let m = norm_back(c) * dt;
            mass += m;
            moment += m * (c as f64 + 0.5) * dt;
        }
        if mass > 0.0 {
            out.push((moment / mass, mass));
        }
        b = end;
    }
    out
}

/// `|R_T g|_alpha^2 / C^2` for masses already shifted by `T`.
fn weighted_norm_sq(shifted: &[(f64, f64)], h: f64, alpha: f64) -> f64 {
    let (u_min, u_max) = shifted
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &(u, _)| (lo.min(u), hi.max(u)));
    let phi = |t: f64| shifted.iter().map(|&(u, w)| w / (t + u)).sum::<f64>();
    let t_lo = 1e-3 * u_min;
    let t_hi = 1e3 * u_max;
    let e = 1.0 - 2.0 * h;
    // Below t_lo: phi is flat and (1+t)^(2 alpha) is 1.
    let phi0 = phi(0.0);
    let mut acc = phi0 * phi0 * t_lo.powf(e + 1.0) / (e + 1.0);
    let mut a = t_lo;
    while a < t_hi {
        let b = 2.0 * a;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for &(x, w) in &GL4 {
            let t = mid + half * x;
            let f = phi(t);
            acc += half * w * (1.0 + t).powf(2.0 * alpha) * t.powf(e) * f * f;
        }
        a = b;
    }
    // Above t_hi: phi(t) ~ S / t.
    let s = phi(a) * a;
    acc += s * s * a.powf(2.0 * alpha - 2.0 * h) / (2.0 * h - 2.0 * alpha);
    acc
}

/// Tail integral `int (-s)^(H-3/2) |g(s)| ds`, exact per cell.
fn tail_integral(g: &DriftSignal, h: f64) -> f64 {
    let n = g.grid().n_steps();
    let dt = g.grid().dt();
    let p = h - 0.5;
    let mut acc = 0.0;
    for b in 0..n {
        let m = g.cell_norm(n - 1 - b);
        if m == 0.0 {
            continue;
        }
        if b == 0 && p <= 0.0 {
            return f64::INFINITY;
        }
        let lo = b as f64 * dt;
        let hi = lo + dt;
        acc += m * (hi.powf(p) - lo.powf(p)) / p;
    }
    acc
}

/// Both terms of the cost for a past signal (grid ending at 0).
pub fn cost_breakdown(g: &DriftSignal, alpha: AlphaExponent, h: Hurst) -> CostBreakdown {
    let dt = g.grid().dt();
    let consts = reference_constants(h, dt);
    let c = consts.g2_constant().abs();
    let ck = consts.cost_tail_constant();
    let tail_term = if ck == 0.0 { 0.0 } else { ck * tail_integral(g, h.value()) };
    let base = masses(g);
    if base.is_empty() || c == 0.0 {
        return CostBreakdown {
            sup_term: 0.0,
            tail_term,
            argmax_t: dt,
        };
    }
    let top = 4.0 * g.grid().duration();
    let mut best = (0.0, dt);
    let mut t = dt;
    let mut shifted = base.clone();
    while t <= top {
        for (s, b) in shifted.iter_mut().zip(&base) {
            s.0 = b.0 + t;
            s.1 = b.1 * s.0.powf(h.kernel_exponent());
        }
        let v = c * weighted_norm_sq(&shifted, h.value(), alpha.value()).sqrt();
        if v > best.0 {
            best = (v, t);
        }
        t *= 2.0;
    }
    CostBreakdown {
        sup_term: best.0,
        tail_term,
        argmax_t: best.1,
    }
}

pub fn cost(g: &DriftSignal, alpha: AlphaExponent, h: Hurst) -> CostValue {
    cost_breakdown(g, alpha, h).total()
}

/// `theta_t g`: the signal moved `t` further into the past, zero-filled
/// near the present, on the same grid.
pub fn shift_signal(g: &DriftSignal, t: f64) -> crate::Result<DriftSignal> {
    let k = crate::noise::steps_for(g.grid().dt(), t)?;
    let n = g.grid().n_steps();
    let dim = g.dim();
    // Oldest first: cell i - k of the result is cell i of the input.
    let mut out = vec![0.0; n * dim];
    for i in k.min(n)..n {
        out[(i - k) * dim..(i - k + 1) * dim].copy_from_slice(g.cell(i));
    }
    DriftSignal::new(*g.grid(), dim, out)
}
