//! Self-coupling of two solutions: contraction, hitting, coupling of the
//! fractional futures, and waiting, run as a Markov chain.

mod chain;
mod gauss;
mod state;
mod steps;

pub use chain::{run_coupled_chain, state_cost, InitialLaw, RunRecord, StepRecord};
pub use gauss::{coupling_radius, gaussian_coupling_1d, GaussDraw};
pub use state::{calibrated_waits, AuxState, CoupledState, CouplingMode, CouplingParams, OutcomeKind, StepKind, StepOutcome};
pub use steps::{
    binding_drift, coupling_shift, is_admissible, past_cost, step0, step1, step2, step3, ControlledRun,
    HittingMap, HIT_TOLERANCE, MAX_COUPLING_CELLS, RHO_CLAMP,
};
