//! `memwalk`: theory queries, ensembles, verification runs, phase diagrams
//! and exact path laws for the memory random walk.
//!
//! Exit status is 0 on success, 1 on usage or input errors and 2 when a
//! verification run completes but fails a statistical check.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memwalk::montecarlo::TheoremTag;

use config::{Format, InitArg, ParamsConfig, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "memwalk",
    version,
    about = "Random walk with full memory and a random tendency"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Thresholds, limits, covariances and limit moments as JSON
    Theory(#[command(flatten)] Common),
    /// Run an ensemble and summarise it at each checkpoint
    Simulate(#[command(flatten)] Common),
    /// Check one theorem by simulation; exit 2 if a check fails
    Verify {
        #[command(flatten)]
        common: Common,
        /// LLN, CLT-diffusive, CLT-critical, Superdiffusive or Moments
        #[arg(long)]
        tag: Option<TheoremTag>,
    },
    /// Regime and fitted scaling exponent over a (p, theta) grid
    PhaseDiagram {
        #[command(flatten)]
        common: Common,
        /// Comma-separated values of p
        #[arg(long, value_delimiter = ',')]
        p_grid: Option<Vec<f64>>,
        /// Comma-separated values of theta
        #[arg(long, value_delimiter = ',')]
        theta_grid: Option<Vec<f64>>,
    },
    /// Exact law of every path of length --steps as JSON
    Oracle(#[command(flatten)] Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run configuration; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spatial dimension
    #[arg(long)]
    d: Option<usize>,
    /// Allow the walker to stay put (K = 2d + 1)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    lazy: Option<bool>,
    /// Memory strength p in [0, 1]
    #[arg(long)]
    p: Option<f64>,
    /// Probability theta of the memory branch
    #[arg(long)]
    theta: Option<f64>,
    /// First step law: uniform, fixed:IDX or custom:FILE (JSON array)
    #[arg(long)]
    init: Option<InitArg>,
    /// Number of steps
    #[arg(long)]
    steps: Option<u64>,
    /// Comma-separated increasing checkpoints
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u64>>,
    /// Number of independent replicas
    #[arg(long)]
    reps: Option<u64>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread cap
    #[arg(long)]
    workers: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn resolve(self, subcommand: &str) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.subcommand = Some(subcommand.to_string());
        if self.d.is_some() || self.lazy.is_some() || self.p.is_some() || self.theta.is_some() {
            let base = cfg.params;
            cfg.params = Some(ParamsConfig {
                d: self.d.or(base.map(|b| b.d)).unwrap_or(1),
                lazy: self.lazy.or(base.map(|b| b.lazy)).unwrap_or(false),
                p: self.p.or(base.and_then(|b| b.p)),
                theta: self.theta.or(base.and_then(|b| b.theta)),
            });
        }
        macro_rules! take {
            ($field:ident, $flag:expr) => {
                if let Some(v) = $flag {
                    cfg.$field = Some(v);
                }
            };
        }
        take!(init, self.init.map(|i| i.0));
        take!(n_steps, self.steps);
        take!(checkpoints, self.checkpoints);
        take!(replicas, self.reps);
        take!(seed, self.seed);
        take!(workers, self.workers);
        take!(out, self.out);
        take!(format, self.format);
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    match cli.command {
        Command::Theory(c) => commands::theory(&c.resolve("theory")?),
        Command::Simulate(c) => commands::simulate(&c.resolve("simulate")?),
        Command::Verify { common, tag } => {
            let mut cfg = common.resolve("verify")?;
            if tag.is_some() {
                cfg.tag = tag;
            }
            commands::verify(&cfg)
        }
        Command::PhaseDiagram {
            common,
            p_grid,
            theta_grid,
        } => {
            let mut cfg = common.resolve("phase-diagram")?;
            if p_grid.is_some() {
                cfg.p_grid = p_grid;
            }
            if theta_grid.is_some() {
                cfg.theta_grid = theta_grid;
            }
            commands::phase_diagram(&cfg)
        }
        Command::Oracle(c) => commands::oracle(&c.resolve("oracle")?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::StatisticalFailure) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
