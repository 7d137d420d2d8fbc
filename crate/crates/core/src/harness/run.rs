use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use super::tail::{theory_gamma, tv_bound, TailEstimate};
use crate::coupling::{run_coupled_chain, RunRecord};
use crate::error::{Error, Result};

/// Independent stream `run` of the experiment seed.
pub fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

/// Raw traces, in run order, and the tail estimate built from them.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub tail: TailEstimate,
    pub theory_gamma: f64,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub fitted_gamma: Option<f64>,
    pub gamma_ci: Option<(f64, f64)>,
    pub theory_gamma: f64,
    pub censored_count: usize,
    pub sample_count: usize,
}

/// Runs every chain of a validated experiment. The output does not depend
/// on the number of workers.
pub fn run_chains(exp: &Experiment) -> Result<Vec<RunRecord>> {
    if exp.sample_count == 0 {
        return Err(Error::EmptyExperiment);
    }
    let job = || -> Result<Vec<RunRecord>> {
        (0..exp.sample_count)
            .into_par_iter()
            .map(|i| {
                let mut rng = run_rng(exp.seed, i);
                run_coupled_chain(
                    &exp.mu_x,
                    &exp.mu_y,
                    &exp.params,
                    &exp.drift,
                    &exp.sigma,
                    &mut rng,
                    exp.t_max,
                )
            })
            .collect()
    };
    match exp.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(job),
        None => job(),
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let exp = cfg.validate()?;
    let runs = run_chains(&exp)?;
    let tail = TailEstimate::from_runs(&runs, exp.seed)?;
    Ok(ExperimentResult {
        runs,
        tail,
        theory_gamma: theory_gamma(exp.params.h)?,
    })
}

impl ExperimentResult {
    pub fn summary(&self) -> Summary {
        Summary {
            fitted_gamma: self.tail.fitted_gamma,
            gamma_ci: self.tail.gamma_ci,
            theory_gamma: self.theory_gamma,
            censored_count: self.tail.censored_count,
            sample_count: self.tail.sample_count,
        }
    }

    pub fn write_runs<W: Write>(&self, out: &mut W) -> Result<()> {
        for (i, r) in self.runs.iter().enumerate() {
            r.write_jsonl(i, out)?;
        }
        Ok(())
    }

    pub fn write_tail_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,survival,tv_bound")?;
        for ((t, b), s) in tv_bound(&self.tail).into_iter().zip(&self.tail.survival) {
            writeln!(out, "{t},{s},{b}")?;
        }
        Ok(())
    }

    /// Writes `runs.jsonl`, `tail.csv` and `summary.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut runs = BufWriter::new(File::create(dir.join("runs.jsonl"))?);
        self.write_runs(&mut runs)?;
        runs.flush()?;
        let mut tail = BufWriter::new(File::create(dir.join("tail.csv"))?);
        self.write_tail_csv(&mut tail)?;
        tail.flush()?;
        let mut summary = BufWriter::new(File::create(dir.join("summary.json"))?);
        serde_json::to_writer_pretty(&mut summary, &self.summary())?;
        summary.write_all(b"\n")?;
        summary.flush()?;
        Ok(())
    }
}
