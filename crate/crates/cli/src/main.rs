use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use loclust::{TruncationPolicy, WeightMode};
use loclust_cli::experiments::{self, RecoveryPlan};
use loclust_cli::{ExperimentConfig, GammaRule, exit_status, Outcome, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "loclust", version, about = "Localized sum-of-norms clustering experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command. Each one overrides the matching config key.
#[derive(Args)]
struct Common {
    /// JSON experiment config; missing keys take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seeds, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sample sizes, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Fusion strengths, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Explicit gamma values, comma separated
    #[arg(long, global = true, value_delimiter = ',', conflicts_with = "c0")]
    gamma: Option<Vec<f64>>,
    /// Use the gamma schedule with this constant
    #[arg(long, global = true)]
    c0: Option<f64>,
    /// Truncation: none, cutoff, or a radius
    #[arg(long, global = true)]
    truncation: Option<String>,
    /// exponential or uniform
    #[arg(long, global = true)]
    weight_mode: Option<String>,
    /// Primal and dual residual tolerance
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Truncation radii for truncation-check
    #[arg(long, global = true, value_delimiter = ',')]
    omega: Option<Vec<f64>>,
    /// Perturbation sizes for stability
    #[arg(long, global = true, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    /// Surface gaps for compare-unweighted
    #[arg(long, global = true, value_delimiter = ',')]
    gap: Option<Vec<f64>>,
    /// Two-ball model: dimension, radius and surface gap, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    two_balls: Option<Vec<f64>>,
    /// Model description JSON file
    #[arg(long, global = true, conflicts_with = "two_balls")]
    model: Option<PathBuf>,
    /// Fixed cloud file for truncation-check and stability
    #[arg(long, global = true)]
    cloud: Option<PathBuf>,
    /// The fixed cloud file has a trailing label column
    #[arg(long, global = true)]
    cloud_labeled: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample labeled clouds for every (N, seed)
    Generate,
    /// Solve one cloud file
    Solve {
        input: PathBuf,
        /// The last CSV column holds labels
        #[arg(long)]
        labeled: bool,
    },
    /// Centroid error over the explicit gamma grid on one sample
    SweepGamma,
    /// Mean centroid error over the N grid with gamma from the schedule
    SweepN,
    /// Truncated against full minimizer, checked against the truncation bound
    TruncationCheck,
    /// Optimal-value change under perturbation, checked against the stability bound
    Stability,
    /// Exponential against uniform weights over the gap grid
    CompareUnweighted,
    /// Locate the empirical fusion threshold per seed
    FusionThreshold,
    /// Fit c0 and the threshold on a calibration sample, then test every seed
    Recovery {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        c0_grid: Vec<f64>,
        #[arg(long, default_value_t = 1_000_003)]
        calibration_seed: u64,
        #[arg(long, default_value_t = 2.0)]
        lambda_factor: f64,
    },
}

fn build_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &c.seed {
        cfg.seeds = v.clone();
    }
    if let Some(v) = &c.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &c.n {
        cfg.n = v.clone();
    }
    if let Some(v) = &c.lambda {
        cfg.lambda = v.clone();
    }
    if let Some(v) = &c.gamma {
        cfg.gamma = GammaRule::Explicit(v.clone());
    }
    if let Some(c0) = c.c0 {
        cfg.gamma = GammaRule::Schedule { c0 };
    }
    if let Some(t) = &c.truncation {
        cfg.truncation = match t.as_str() {
            "none" => TruncationPolicy::None,
            "cutoff" => TruncationPolicy::Cutoff,
            radius => TruncationPolicy::Explicit(radius.parse().with_context(|| format!("bad truncation '{radius}'"))?),
        };
    }
    if let Some(m) = &c.weight_mode {
        cfg.weight_mode = match m.as_str() {
            "exponential" => WeightMode::Exponential,
            "uniform" => WeightMode::Uniform,
            other => anyhow::bail!("unknown weight mode '{other}'"),
        };
    }
    if let Some(eps) = c.eps {
        cfg.solver.eps_primal = eps;
        cfg.solver.eps_dual = eps;
    }
    if let Some(v) = &c.omega {
        cfg.omega = v.clone();
    }
    if let Some(v) = &c.delta {
        cfg.delta = v.clone();
    }
    if let Some(v) = &c.gap {
        cfg.gap = v.clone();
    }
    if let Some(v) = &c.two_balls {
        if v.len() != 3 || v[0].fract() != 0.0 || v[0] < 1.0 {
            anyhow::bail!("--two-balls takes DIM,RADIUS,GAP with a positive integer DIM");
        }
        cfg.model = loclust::genmodel::BallModel::two_balls(v[0] as usize, v[1], v[2])?;
    }
    if let Some(path) = &c.cloud {
        cfg.cloud = Some(path.clone());
        cfg.cloud_labeled = c.cloud_labeled;
    }
    if let Some(path) = &c.model {
        cfg.model = loclust::genmodel::BallModel::load(path)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    if let Some(threads) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let cfg = build_config(&cli.common)?;
    match &cli.command {
        Command::Generate => experiments::cmd_generate(&cfg),
        Command::Solve { input, labeled } => experiments::cmd_solve(&cfg, input, *labeled),
        Command::SweepGamma => experiments::cmd_sweep_gamma(&cfg),
        Command::SweepN => experiments::cmd_sweep_n(&cfg),
        Command::TruncationCheck => experiments::cmd_truncation_check(&cfg),
        Command::Stability => experiments::cmd_stability(&cfg),
        Command::CompareUnweighted => experiments::cmd_compare_unweighted(&cfg),
        Command::FusionThreshold => experiments::cmd_fusion_threshold(&cfg),
        Command::Recovery {
            c0_grid,
            calibration_seed,
            lambda_factor,
        } => experiments::cmd_recovery(
            &cfg,
            &RecoveryPlan {
                c0_grid: c0_grid.clone(),
                calibration_seed: *calibration_seed,
                lambda_factor: *lambda_factor,
            },
        ),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors; 2 is reserved for bound violations here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_ERROR as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            let status = exit_status(&outcome);
            if status != 0 {
                eprintln!("{} bound check(s) failed", outcome.violations);
            }
            ExitCode::from(status as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
