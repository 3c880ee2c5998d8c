use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sqn::config::{Experiment, ExperimentConfig, Mode, Overrides};
use sqn::experiments;

const SCHEMAS: &str = "\
Output files (UTF-8 CSV, LF line endings, header row):
  gp-demo       gp_demo.csv       x, true_hess, post_mean, post_std, prior_mean
                observations.csv  k, x, grad
  run-1d        trace_NNNN.csv    k, x, fhat, gnorm, alpha, lambda, ls_trials, satisfied
                summary.csv       run, status, x_final, f_final, iterations, fallbacks
  run-lgss      data_NNNN.csv     t, y
                trace_NNNN.csv    k, a, c, log_q, log_r, fhat, gnorm, alpha, lambda, ls_trials, satisfied
                summary.csv       run, status, a, c, q, r, var_y, iterations, fallbacks
  run-nltoy     data_NNNN.csv     t, y
                trace_NNNN.csv    k, a, b, c, d, log_q, log_r, fhat, gnorm, alpha, lambda, ls_trials, satisfied
                summary.csv       run, status, a, b, c, d, q, r, iterations, fallbacks
  armijo-check  armijo.csv        c_factor, c, alpha, mean, std_err, draws, holds, expected, pass
Every experiment also writes summary.json with the resolved config, statistics and checks.";

#[derive(Parser)]
#[command(name = "sqn", version, about = "Stochastic quasi-Newton experiments", after_help = SCHEMAS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hessian posterior of the scalar test function from 12 noisy gradients
    GpDemo(Common),
    /// Optimiser on the noisy scalar test function
    #[command(name = "run-1d")]
    Run1d(Common),
    /// Linear Gaussian state-space identification, noisy Kalman likelihood
    RunLgss(Common),
    /// Nonlinear benchmark identification, particle-filter likelihood
    RunNltoy(Common),
    /// Monte Carlo check of the Armijo constant bound
    ArmijoCheck(Common),
}

#[derive(Args)]
struct Common {
    /// JSON file merged over the built-in defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replicates
    #[arg(long)]
    runs: Option<usize>,
    /// Optimiser iterations
    #[arg(long)]
    iters: Option<usize>,
    /// Particle count (run-nltoy only)
    #[arg(long)]
    particles: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Hessian measurement model
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Full,
    Simplified,
}

fn execute(experiment: Experiment, args: Common) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(experiment, path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    cfg.apply(&Overrides {
        seed: args.seed,
        runs: args.runs,
        iters: args.iters,
        particles: args.particles,
        out: args.out,
        mode: args.mode.map(|m| match m {
            ModeArg::Full => Mode::Full,
            ModeArg::Simplified => Mode::Simplified,
        }),
    })?;
    let report = experiments::run(&cfg)?;
    for line in &report.lines {
        println!("{line}");
    }
    println!("summary: {}", cfg.out.join("summary.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::GpDemo(a) => (Experiment::GpDemo, a),
        Command::Run1d(a) => (Experiment::Run1d, a),
        Command::RunLgss(a) => (Experiment::RunLgss, a),
        Command::RunNltoy(a) => (Experiment::RunNltoy, a),
        Command::ArmijoCheck(a) => (Experiment::ArmijoCheck, a),
    };
    match execute(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
