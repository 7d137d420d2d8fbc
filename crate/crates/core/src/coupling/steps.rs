use std::sync::Arc;

use rand::Rng;

use super::gauss::gaussian_coupling_1d;
use super::state::{AuxState, CoupledState, CouplingMode, CouplingParams, OutcomeKind, StepKind, StepOutcome};
use crate::error::{Error, Result};
use crate::fracops::{conv, cost, kernel, CostValue, DriftSignal, FracKernel};
use crate::noise::{
    concat_pt, fbm_increments, round_up, steps_for, wiener_increments, FuturePath, PastPath,
};
use crate::sde::{contraction_wait_bound, solve_increments, CellStepper, DiffusionMatrix, DriftSpec, DEFAULT_SUBSTEPS};

/// Below this distance the hitting control is switched off.
pub const RHO_CLAMP: f64 = 1e-12;
/// Residual allowed at `t = 1/2` of a hitting step.
pub const HIT_TOLERANCE: f64 = 1e-8;
/// Longest coupling step, in cells.
pub const MAX_COUPLING_CELLS: usize = 1 << 21;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn frac_kernel(p: &CouplingParams) -> Result<Arc<FracKernel>> {
    Ok(kernel(p.h, p.dt, steps_for(p.dt, p.t_past)?))
}

/// Fractional increments over `n` future cells caused by the past alone.
fn past_contribution(k: &FracKernel, past: &PastPath, n: usize) -> Vec<f64> {
    let dim = past.dim();
    fbm_increments(k, &past.increments(), &vec![0.0; n * dim], dim)
}

/// `(past_y - past_x)` contribution, divided by the kernel normalisation.
fn past_difference(k: &FracKernel, z: &CoupledState, n: usize) -> Vec<f64> {
    let cx = past_contribution(k, &z.w_x, n);
    let cy = past_contribution(k, &z.w_y, n);
    cy.iter().zip(&cx).map(|(a, b)| (a - b) / k.alpha()).collect()
}

/// Cost of the current Wiener-past discrepancy.
pub fn past_cost(w_x: &PastPath, w_y: &PastPath, p: &CouplingParams) -> Result<CostValue> {
    let g = DriftSignal::from_wiener_difference(w_x, w_y)?;
    Ok(cost(&g, p.alpha_exponent(), p.h))
}

/// Distance within `1 + (1 + c4)/c2` and past cost at most one.
pub fn is_admissible(z: &CoupledState, p: &CouplingParams, drift: &DriftSpec) -> bool {
    z.distance() <= drift.admissible_distance()
        && past_cost(&z.w_x, &z.w_y, p).map(|c| c.value() <= 1.0).unwrap_or(false)
}

/// `-sigma^-1 (kappa1 rho + kappa2 rho / sqrt|rho|)`, zero at `rho = 0`.
pub fn binding_drift(rho: &[f64], p: &CouplingParams, sigma: &DiffusionMatrix) -> Vec<f64> {
    let r = norm(rho);
    let mut out = vec![0.0; rho.len()];
    if r == 0.0 {
        return out;
    }
    let v: Vec<f64> = rho.iter().map(|x| -(p.kappa1 * x + p.kappa2 * x / r.sqrt())).collect();
    sigma.apply_inv(&v, &mut out);
    out
}

/// Both solutions and their pasts after running on a pair of Wiener futures.
struct Evolved {
    next: CoupledState,
    max_gap: f64,
}

fn evolve(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    xi_x: &[f64],
    xi_y: &[f64],
    t0: f64,
    aux: AuxState,
) -> Result<Evolved> {
    let dim = z.x.len();
    let n = xi_x.len() / dim;
    let k = frac_kernel(p)?;
    let bx = fbm_increments(&k, &z.w_x.increments(), xi_x, dim);
    let by = fbm_increments(&k, &z.w_y.increments(), xi_y, dim);
    let mut stepper = CellStepper::new(drift, DEFAULT_SUBSTEPS);
    let xs = solve_increments(&z.x, &bx, p.dt, t0, &mut stepper, sigma, None)?;
    let ys = solve_increments(&z.y, &by, p.dt, t0, &mut stepper, sigma, None)?;
    let max_gap = (0..=n)
        .map(|i| {
            xs[i * dim..(i + 1) * dim]
                .iter()
                .zip(&ys[i * dim..(i + 1) * dim])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    let duration = n as f64 * p.dt;
    let fx = FuturePath::from_increments(p.dt, dim, xi_x)?;
    let fy = FuturePath::from_increments(p.dt, dim, xi_y)?;
    let next = CoupledState::new(
        xs[n * dim..].to_vec(),
        ys[n * dim..].to_vec(),
        concat_pt(&z.w_x, &fx, duration)?,
        concat_pt(&z.w_y, &fy, duration)?,
        aux,
    )?;
    Ok(Evolved { next, max_gap })
}

fn outcome(
    kind: OutcomeKind,
    ev: Evolved,
    xi_x: Vec<f64>,
    xi_y: Vec<f64>,
    p: &CouplingParams,
) -> Result<(StepOutcome, f64)> {
    let dim = ev.next.x.len();
    let cost_after = past_cost(&ev.next.w_x, &ev.next.w_y, p)?;
    let n = xi_x.len() / dim;
    let out = StepOutcome {
        kind,
        duration: n as f64 * p.dt,
        next_aux: ev.next.aux,
        wiener_pair: (
            FuturePath::from_increments(p.dt, dim, &xi_x)?,
            FuturePath::from_increments(p.dt, dim, &xi_y)?,
        ),
        cost_after,
        next: ev.next,
    };
    Ok((out, ev.max_gap))
}

/// A step whose two Wiener futures coincide.
fn shared_noise_step<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    duration: f64,
    t0: f64,
    next_aux: AuxState,
) -> Result<(StepOutcome, f64)> {
    let dim = z.x.len();
    let n = steps_for(p.dt, duration)?;
    let xi = wiener_increments(rng, n, dim, p.dt);
    let ev = evolve(z, p, drift, sigma, &xi, &xi, t0, next_aux)?;
    outcome(OutcomeKind::Succeeded, ev, xi.clone(), xi, p)
}

fn expect_step(z: &CoupledState, kind: StepKind) -> Result<()> {
    if z.aux.step != kind {
        return Err(Error::InvalidArgument(format!(
            "expected phase {kind:?}, state is in {:?}",
            z.aux.step
        )));
    }
    Ok(())
}

/// Initial contraction: both solutions share one Wiener future until their
/// distance is controlled.
pub fn step0<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
) -> Result<StepOutcome> {
    step0_at(z, p, drift, sigma, rng, 0.0).map(|o| o.0)
}

pub(crate) fn step0_at<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    t0: f64,
) -> Result<(StepOutcome, f64)> {
    expect_step(z, StepKind::Init)?;
    let duration = contraction_wait_bound(z.distance(), drift, p.dt);
    let aux = AuxState::new(StepKind::Hitting, 0, 0, 0.0)?;
    shared_noise_step(z, p, drift, sigma, rng, duration, t0, aux)
}

/// Waiting: shared Wiener future for the stored wait time.
pub fn step3<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
) -> Result<StepOutcome> {
    step3_at(z, p, drift, sigma, rng, 0.0).map(|o| o.0)
}

pub(crate) fn step3_at<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    t0: f64,
) -> Result<(StepOutcome, f64)> {
    expect_step(z, StepKind::Waiting)?;
    if !(z.aux.wait_time > 0.0) {
        return Err(Error::InvalidArgument("waiting phase with zero wait time".into()));
    }
    let duration = round_up(p.dt, z.aux.wait_time);
    let aux = AuxState::new(StepKind::Hitting, z.aux.n_success, z.aux.n_fail, 0.0)?;
    shared_noise_step(z, p, drift, sigma, rng, duration, t0, aux)
}

/// The map sending the Wiener future of `x` to that of `y` during a
/// hitting step, so that `B_y = B_x + G` with an adapted control `G`.
pub struct HittingMap<'a> {
    z: &'a CoupledState,
    p: &'a CouplingParams,
    drift: &'a DriftSpec,
    sigma: &'a DiffusionMatrix,
    kernel: Arc<FracKernel>,
    inverse: Arc<Vec<f64>>,
    past_x: Vec<f64>,
    past_diff: Vec<f64>,
    n: usize,
}

/// One run of the controlled pair.
#[derive(Clone, Debug)]
pub struct ControlledRun {
    /// Wiener increments of `x`.
    pub u: Vec<f64>,
    /// Wiener increments of `y`.
    pub w: Vec<f64>,
    /// `w - u`.
    pub d: Vec<f64>,
    /// Control added to the fractional increments of `y`, per cell.
    pub control: Vec<f64>,
    /// `|y - x|` at each grid point.
    pub gaps: Vec<f64>,
}

impl ControlledRun {
    /// `|y - x|` at `t = 1/2`.
    pub fn gap_at_half(&self) -> f64 {
        self.gaps[(self.gaps.len() - 1) / 2]
    }

    /// `log` of the density of the shifted Wiener law at `u`.
    pub fn log_density(&self, dt: f64) -> f64 {
        -self
            .u
            .iter()
            .zip(&self.d)
            .map(|(u, d)| 2.0 * u * d + d * d)
            .sum::<f64>()
            / (2.0 * dt)
    }
}

impl<'a> HittingMap<'a> {
    pub fn new(
        z: &'a CoupledState,
        p: &'a CouplingParams,
        drift: &'a DriftSpec,
        sigma: &'a DiffusionMatrix,
    ) -> Result<Self> {
        let n = steps_for(p.dt, 1.0)?;
        let kernel = frac_kernel(p)?;
        let inverse = kernel.inverse(n);
        Ok(Self {
            past_x: past_contribution(&kernel, &z.w_x, n),
            past_diff: past_difference(&kernel, z, n),
            z,
            p,
            drift,
            sigma,
            kernel,
            inverse,
            n,
        })
    }

    /// Fractional-increment control for the current cell: the binding
    /// drift, capped by the one-cell dead-beat value of the linearised gap
    /// equation.
    fn control(&self, x: &[f64], y: &[f64], fx: &mut [f64], fy: &mut [f64]) -> Vec<f64> {
        let dim = x.len();
        let dt = self.p.dt;
        let rho: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut g = vec![0.0; dim];
        if norm(&rho) <= RHO_CLAMP {
            return g;
        }
        let bind: Vec<f64> = binding_drift(&rho, self.p, self.sigma).iter().map(|v| v * dt).collect();
        self.drift.eval(x, fx);
        self.drift.eval(y, fy);
        let dead: Vec<f64> = (0..dim)
            .map(|i| {
                let j = if rho[i] != 0.0 { (fy[i] - fx[i]) / rho[i] } else { 0.0 };
                let e = (j * dt).exp();
                let phi = if (j * dt).abs() < 1e-8 { dt } else { (e - 1.0) / j };
                -e * rho[i] * dt / phi
            })
            .collect();
        let mut bind_state = vec![0.0; dim];
        self.sigma.apply(&bind, &mut bind_state);
        if norm(&bind_state) < norm(&dead) {
            bind
        } else {
            self.sigma.apply_inv(&dead, &mut g);
            g
        }
    }

    /// Runs the controlled pair. With `forward`, `input` is the Wiener
    /// future of `x`; otherwise it is that of `y` and the run inverts the map.
    pub fn run(&self, input: &[f64], forward: bool) -> Result<ControlledRun> {
        let dim = self.z.x.len();
        let (n, dt) = (self.n, self.p.dt);
        let a = self.kernel.coeffs();
        let b = &self.inverse;
        let alpha = self.kernel.alpha();
        let mut u = vec![0.0; n * dim];
        let mut w = vec![0.0; n * dim];
        let mut d = vec![0.0; n * dim];
        let mut e = vec![0.0; n * dim];
        let mut control = vec![0.0; n * dim];
        let mut gaps = Vec::with_capacity(n + 1);
        let mut x = self.z.x.clone();
        let mut y = self.z.y.clone();
        let (mut fx, mut fy) = (vec![0.0; dim], vec![0.0; dim]);
        let mut stepper = CellStepper::new(self.drift, DEFAULT_SUBSTEPS);
        let (mut drive, mut force) = (vec![0.0; dim], vec![0.0; dim]);
        gaps.push(norm(&y.iter().zip(&x).map(|(p, q)| p - q).collect::<Vec<_>>()));
        for k in 0..n {
            let g = self.control(&x, &y, &mut fx, &mut fy);
            let mut bx = vec![0.0; dim];
            for c in 0..dim {
                let i = k * dim + c;
                control[i] = g[c];
                e[i] = g[c] / alpha - self.past_diff[i];
                d[i] = (0..=k).map(|m| b[m] * e[(k - m) * dim + c]).sum();
                if forward {
                    u[i] = input[i];
                    w[i] = u[i] + d[i];
                } else {
                    w[i] = input[i];
                    u[i] = w[i] - d[i];
                }
                let lim = k.min(a.len() - 1);
                bx[c] = alpha * (0..=lim).map(|m| a[m] * u[(k - m) * dim + c]).sum::<f64>() + self.past_x[i];
            }
            for c in 0..dim {
                drive[c] = bx[c] / dt;
            }
            self.sigma.apply(&drive, &mut force);
            let ok_x = stepper.advance(&mut x, &force, dt);
            for c in 0..dim {
                drive[c] = (bx[c] + g[c]) / dt;
            }
            self.sigma.apply(&drive, &mut force);
            let ok_y = stepper.advance(&mut y, &force, dt);
            if !(ok_x && ok_y) {
                return Err(Error::BlowUp { t: (k + 1) as f64 * dt });
            }
            gaps.push(norm(&y.iter().zip(&x).map(|(p, q)| p - q).collect::<Vec<_>>()));
        }
        Ok(ControlledRun { u, w, d, control, gaps })
    }
}

/// Hitting attempt over `[0, 1]`: a symmetrised accept/reject coupling of
/// the Wiener futures built on [`HittingMap`].
pub fn step1<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
) -> Result<StepOutcome> {
    step1_at(z, p, drift, sigma, rng, 0.0).map(|o| o.0)
}

pub(crate) fn step1_at<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    t0: f64,
) -> Result<(StepOutcome, f64)> {
    expect_step(z, StepKind::Hitting)?;
    let map = HittingMap::new(z, p, drift, sigma)?;
    let dim = z.x.len();
    let draw = wiener_increments(rng, map.n, dim, p.dt);
    let fwd = map.run(&draw, true)?;
    let residual = fwd.gap_at_half();
    if residual > HIT_TOLERANCE {
        return Err(Error::KappaTooSmall { residual });
    }
    let p1 = 0.5 * fwd.log_density(p.dt).exp().min(1.0);
    let bound = match p.mode {
        CouplingMode::ForcedSuccess => true,
        CouplingMode::Normal => rng.random::<f64>() < p1,
    };
    let (xi_x, xi_y) = if bound {
        (fwd.u, fwd.w)
    } else {
        let inv = map.run(&draw, false)?;
        let log_ratio = -(inv.u.iter().map(|v| v * v).sum::<f64>() - draw.iter().map(|v| v * v).sum::<f64>())
            / (2.0 * p.dt);
        let s = 0.5 * log_ratio.exp().min(1.0);
        if rng.random::<f64>() * (1.0 - p1) < s {
            (draw, inv.u)
        } else {
            (draw.clone(), draw)
        }
    };
    let n_fail = z.aux.n_fail;
    let (kind, aux) = if bound {
        (OutcomeKind::Succeeded, AuxState::new(StepKind::Coupling, 0, n_fail, 0.0)?)
    } else {
        let wait = p.t_star * (n_fail.max(1) as f64).powf(p.fail_exponent());
        (OutcomeKind::Failed, AuxState::new(StepKind::Waiting, 0, n_fail + 1, wait)?)
    };
    let ev = evolve(z, p, drift, sigma, &xi_x, &xi_y, t0, aux)?;
    outcome(kind, ev, xi_x, xi_y, p)
}

/// Wiener-future difference that makes the two fractional futures agree on
/// `n` cells given the current pasts.
pub fn coupling_shift(z: &CoupledState, p: &CouplingParams, n: usize) -> Result<Vec<f64>> {
    let k = frac_kernel(p)?;
    let c: Vec<f64> = past_difference(&k, z, n).into_iter().map(|v| -v).collect();
    let b = k.inverse(n);
    Ok(conv::causal_rows(&b, &c, z.x.len(), n))
}

/// Coupling step of length `2^N`: a one-dimensional Gaussian coupling
/// along the required shift, the orthogonal complement shared.
pub fn step2<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
) -> Result<StepOutcome> {
    step2_at(z, p, drift, sigma, rng, 0.0).map(|o| o.0)
}

pub(crate) fn step2_at<R: Rng + ?Sized>(
    z: &CoupledState,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    t0: f64,
) -> Result<(StepOutcome, f64)> {
    expect_step(z, StepKind::Coupling)?;
    let big_n = z.aux.n_success;
    let length = 2f64.powi(big_n as i32);
    let n = steps_for(p.dt, length)?;
    if n > MAX_COUPLING_CELLS {
        return Err(Error::HorizonExceeded(format!(
            "coupling step of length {length} needs {n} cells, limit {MAX_COUPLING_CELLS}"
        )));
    }
    let dim = z.x.len();
    let d = coupling_shift(z, p, n)?;
    let dn = norm(&d);
    let sd = p.dt.sqrt();
    let a = dn / sd;
    let b = (p.b_const * 2f64.powf(-p.alpha * big_n as f64)).max(a);
    let base = wiener_increments(rng, n, dim, p.dt);
    let (xi_x, xi_y, bound) = if dn == 0.0 {
        // Every branch of the coupling returns y = x when a = 0.
        (base.clone(), base, true)
    } else {
        let e: Vec<f64> = d.iter().map(|v| v / dn).collect();
        let proj: f64 = base.iter().zip(&e).map(|(x, y)| x * y).sum();
        let g = match p.mode {
            CouplingMode::ForcedSuccess => {
                let x = proj / sd;
                super::gauss::GaussDraw { x, y: x + a, bound: true }
            }
            CouplingMode::Normal => gaussian_coupling_1d(a, b, rng)?,
        };
        let xi_x: Vec<f64> = base.iter().zip(&e).map(|(v, ei)| v + (g.x * sd - proj) * ei).collect();
        let xi_y: Vec<f64> = if g.bound {
            xi_x.iter().zip(&d).map(|(v, di)| v + di).collect()
        } else {
            xi_x.iter().zip(&e).map(|(v, ei)| v + (g.y - g.x) * sd * ei).collect()
        };
        (xi_x, xi_y, g.bound)
    };
    let n_fail = z.aux.n_fail;
    let (kind, aux) = if bound {
        (OutcomeKind::Succeeded, AuxState::new(StepKind::Coupling, big_n + 1, n_fail, 0.0)?)
    } else {
        let wait = p.t_tilde_star * 2f64.powf(p.beta * big_n as f64) * (n_fail.max(1) as f64).powf(p.fail_exponent());
        (OutcomeKind::Failed, AuxState::new(StepKind::Waiting, 0, n_fail + 1, wait)?)
    };
    let ev = evolve(z, p, drift, sigma, &xi_x, &xi_y, t0, aux)?;
    outcome(kind, ev, xi_x, xi_y, p)
}
