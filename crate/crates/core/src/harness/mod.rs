//! Experiment configuration, the parallel driver, tail estimation and
//! constant calibration.

pub mod calibrate;
mod config;
mod run;
mod tail;

pub use calibrate::{calibrate, CalibrationConfig, CalibrationReport, HurstConstants, Setting, WaitScenario};
pub use config::{DriftPreset, Experiment, ExperimentConfig};
pub use run::{run_chains, run_experiment, run_rng, ExperimentResult, Summary};
pub use tail::{fit_gamma, theory_gamma, tv_bound, TailEstimate, BOOTSTRAP_RESAMPLES, MIN_FIT_POINTS};
