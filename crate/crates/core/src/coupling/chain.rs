use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::state::{AuxState, CoupledState, CouplingParams, OutcomeKind, StepKind, StepOutcome};
use super::steps::{is_admissible, past_cost, step0_at, step1_at, step2_at, step3_at};
use crate::error::{Error, Result};
use crate::fracops::CostValue;
use crate::noise::sample_past;
use crate::sde::{DiffusionMatrix, DriftSpec};

/// Law of an initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialLaw {
    Point { value: Vec<f64> },
    /// Independent `N(mean_i, sd^2)` coordinates.
    Gaussian { mean: Vec<f64>, sd: f64 },
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Point { value } => value.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            InitialLaw::Point { value } => value.clone(),
            InitialLaw::Gaussian { mean, sd } => mean
                .iter()
                .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }
}

/// One line of the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t_start: f64,
    pub duration: f64,
    pub step_kind: StepKind,
    pub success: bool,
    pub cost_after: CostValue,
    pub distance_after: f64,
    /// Largest `|x_t - y_t|` over the step.
    pub max_gap: f64,
    /// For hitting steps: whether the state was admissible on entry.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub admissible: Option<bool>,
}

/// Full trace of a chain and its coupling time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
    /// Start of the last successful hitting step when the coupling lasted
    /// until `t_max`.
    pub tau_infinity: Option<f64>,
    pub censored: bool,
    pub t_max: f64,
}

#[derive(Serialize)]
struct StepLine<'a> {
    run: usize,
    #[serde(flatten)]
    step: &'a StepRecord,
}

#[derive(Serialize)]
struct FinalLine {
    run: usize,
    tau_infinity: Option<f64>,
    censored: bool,
}

impl RunRecord {
    /// One JSON object per step, then one with the coupling time.
    pub fn write_jsonl<W: Write>(&self, run: usize, out: &mut W) -> Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut *out, &StepLine { run, step })?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(
            &mut *out,
            &FinalLine {
                run,
                tau_infinity: self.tau_infinity,
                censored: self.censored,
            },
        )?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Costs on entry to each hitting attempt, including attempts deferred
    /// because the state was not admissible.
    pub fn entry_costs(&self) -> Vec<CostValue> {
        self.steps
            .windows(2)
            .filter(|w| w[1].admissible.is_some())
            .map(|w| w[0].cost_after)
            .collect()
    }
}

/// Runs one chain from a shared Wiener past and independent initial
/// conditions until time `t_max`.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled_chain<R: Rng + ?Sized>(
    mu_x: &InitialLaw,
    mu_y: &InitialLaw,
    p: &CouplingParams,
    drift: &DriftSpec,
    sigma: &DiffusionMatrix,
    rng: &mut R,
    t_max: f64,
) -> Result<RunRecord> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    p.validate(drift)?;
    let dim = drift.dim;
    if mu_x.dim() != dim || mu_y.dim() != dim || sigma.dim() != dim {
        return Err(Error::GridMismatch("initial laws, drift and sigma differ in dimension".into()));
    }
    let past = sample_past(rng, p.dt, p.t_past, dim)?;
    let x = mu_x.sample(rng);
    let y = mu_y.sample(rng);
    let mut z = CoupledState::new(x, y, past.clone(), past, AuxState::INITIAL)?;
    let mut t = 0.0;
    let mut steps = Vec::new();
    let mut last_hit: Option<f64> = None;
    while t < t_max {
        let mut admissible = None;
        let (out, max_gap): (StepOutcome, f64) = match z.aux.step {
            StepKind::Init => step0_at(&z, p, drift, sigma, rng, t)?,
            StepKind::Hitting => {
                if is_admissible(&z, p, drift) {
                    admissible = Some(true);
                    step1_at(&z, p, drift, sigma, rng, t)?
                } else {
                    // Not ready: wait one more base period before trying.
                    admissible = Some(false);
                    let mut w = z.clone();
                    w.aux = AuxState::new(StepKind::Waiting, z.aux.n_success, z.aux.n_fail, p.t_star)?;
                    step3_at(&w, p, drift, sigma, rng, t)?
                }
            }
            StepKind::Coupling => step2_at(&z, p, drift, sigma, rng, t)?,
            StepKind::Waiting => step3_at(&z, p, drift, sigma, rng, t)?,
        };
        let kind = if admissible == Some(false) { StepKind::Waiting } else { z.aux.step };
        if kind == StepKind::Hitting && out.kind == OutcomeKind::Succeeded {
            last_hit = Some(t);
        }
        steps.push(StepRecord {
            t_start: t,
            duration: out.duration,
            step_kind: kind,
            success: out.kind == OutcomeKind::Succeeded,
            cost_after: out.cost_after,
            distance_after: out.next.distance(),
            max_gap,
            admissible,
        });
        t += out.duration;
        z = out.next;
    }
    let coupled = z.aux.step == StepKind::Coupling;
    Ok(RunRecord {
        steps,
        tau_infinity: if coupled { last_hit } else { None },
        censored: !coupled,
        t_max,
    })
}

/// Cost of the past discrepancy of a state.
pub fn state_cost(z: &CoupledState, p: &CouplingParams) -> Result<CostValue> {
    past_cost(&z.w_x, &z.w_y, p)
}
