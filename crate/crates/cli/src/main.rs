use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fbm_ergo::harness::{calibrate, run_chains, theory_gamma, CalibrationConfig, ExperimentConfig, ExperimentResult, TailEstimate};

#[derive(Parser)]
#[command(name = "fbm-ergo", version, about = "Coupling-time experiments for SDEs driven by fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of coupled chains and write runs.jsonl, tail.csv and summary.json.
    Run(RunArgs),
    /// Calibrate the waiting constants and write constants.toml.
    Calibrate(CalibrateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// double-well, linear or custom.
    #[arg(long)]
    drift: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, default_value = "constants.toml")]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    hurst: Option<Vec<f64>>,
    /// Failure scenarios per H for both waits.
    #[arg(long)]
    scenarios: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

enum Failure {
    /// The configuration was rejected.
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

use Failure::Invalid;

fn build_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Invalid)?,
        None => {
            let h = args
                .hurst
                .ok_or_else(|| Invalid(anyhow::anyhow!("either --config or --hurst is required")))?;
            ExperimentConfig::new(h, 100, 1024.0, 0)
        }
    };
    if let Some(h) = args.hurst {
        cfg.hurst = h;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = Some(a);
    }
    if args.beta.is_some() {
        cfg.beta = args.beta;
    }
    if let Some(n) = args.samples {
        cfg.sample_count = n;
    }
    if let Some(t) = args.t_max {
        cfg.t_max = t;
    }
    if args.dt.is_some() {
        cfg.dt = args.dt;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(d) = &args.drift {
        cfg.drift = d.parse().map_err(|e: fbm_ergo::Error| Invalid(e.into()))?;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cfg = build_config(&args)?;
    let exp = cfg.validate().map_err(|e| Invalid(e.into()))?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let execute = || -> anyhow::Result<()> {
        let runs = run_chains(&exp)?;
        let tail = TailEstimate::from_runs(&runs, exp.seed)?;
        let res = ExperimentResult {
            runs,
            tail,
            theory_gamma: theory_gamma(exp.params.h)?,
        };
        res.write_outputs(&out)
            .with_context(|| format!("writing results to {}", out.display()))?;
        let s = res.summary();
        println!(
            "{} runs, {} censored; fitted gamma {}; theory gamma {}; results in {}",
            s.sample_count,
            s.censored_count,
            s.fitted_gamma.map_or("undefined".into(), |g| format!("{g:.4}")),
            s.theory_gamma,
            out.display()
        );
        Ok(())
    };
    execute().map_err(Failure::Runtime)
}

fn calibrate_cmd(args: CalibrateArgs) -> anyhow::Result<()> {
    let mut cfg = CalibrationConfig::default();
    if let Some(h) = args.hurst {
        cfg.hursts = h;
    }
    if let Some(n) = args.scenarios {
        cfg.hitting_scenarios = n;
        cfg.coupling_scenarios = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let report = calibrate(&cfg)?;
    std::fs::write(&args.out, report.to_toml_string()?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    for c in &report.hurst {
        println!("H = {}: t_star = {}, t_tilde_star = {}", c.hurst, c.t_star, c.t_tilde_star);
    }
    println!("written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(Invalid(e)) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
            Err(Failure::Runtime(e)) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Calibrate(args) => match calibrate_cmd(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
