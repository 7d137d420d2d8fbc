//! Causal convolutions of real sequences, direct for short inputs and FFT
//! based otherwise.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

const DIRECT_WORK_LIMIT: usize = 1 << 17;

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> PlanPair {
    static PLANS: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    let map = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// `out[k] = sum_{m} kernel[m] * x[k - m]` for `k < out_len`, treating `x`
/// as zero outside its range.
pub fn causal(kernel: &[f64], x: &[f64], out_len: usize) -> Vec<f64> {
    if kernel.is_empty() || x.is_empty() || out_len == 0 {
        return vec![0.0; out_len];
    }
    let work = kernel.len().min(out_len) * x.len().min(out_len);
    if work <= DIRECT_WORK_LIMIT {
        direct(kernel, x, out_len)
    } else {
        fft(kernel, x, out_len)
    }
}

fn direct(kernel: &[f64], x: &[f64], out_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; out_len];
    for (j, &xj) in x.iter().enumerate().take(out_len) {
        if xj == 0.0 {
            continue;
        }
        let reach = kernel.len().min(out_len - j);
        for (o, &a) in out[j..j + reach].iter_mut().zip(&kernel[..reach]) {
            *o += a * xj;
        }
    }
    out
}

fn fft(kernel: &[f64], x: &[f64], out_len: usize) -> Vec<f64> {
    let k = &kernel[..kernel.len().min(out_len)];
    let x = &x[..x.len().min(out_len)];
    let n = (k.len() + x.len() - 1).next_power_of_two();
    let (fwd, inv) = plans(n);
    let mut fa: Vec<Complex<f64>> = k.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fa.resize(n, Complex::new(0.0, 0.0));
    let mut fx: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fx.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fx);
    for (a, b) in fa.iter_mut().zip(&fx) {
        *a *= *b;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    let mut out: Vec<f64> = fa.iter().take(out_len).map(|c| c.re * scale).collect();
    out.resize(out_len, 0.0);
    out
}

/// Applies [`causal`] to each coordinate of a row-major `len x dim` array.
pub fn causal_rows(kernel: &[f64], x: &[f64], dim: usize, out_len: usize) -> Vec<f64> {
    let len = x.len() / dim;
    let mut out = vec![0.0; out_len * dim];
    let mut col = vec![0.0; len];
    for c in 0..dim {
        for (i, v) in col.iter_mut().enumerate() {
            *v = x[i * dim + c];
        }
        let y = causal(kernel, &col, out_len);
        for (i, v) in y.into_iter().enumerate() {
            out[i * dim + c] = v;
        }
    }
    out
}
