mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinlab::cumulants::Lattice;

use crate::config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config invalid: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Lib(#[from] spinlab::Error),
    #[error("model fails validation: {0}")]
    ValidationFailed(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use spinlab::Error as E;
        match self {
            CliError::ConfigInvalid(_) | CliError::ValidationFailed(_) => 2,
            CliError::Io(_) => 1,
            CliError::Lib(e) => match e {
                E::SupportTooLarge { .. }
                | E::WindowTooLarge { .. }
                | E::RingTooLarge { .. }
                | E::StepSizeRejected { .. }
                | E::FitDegenerate(_)
                | E::ArityTooLarge { .. }
                | E::IncompleteTable(_)
                | E::NoChargesFound
                | E::DegenerateGram { .. }
                | E::DivergenceSplitFailed(_) => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Classical,
    Noncrossing,
}

#[derive(Debug, Parser)]
#[command(name = "spinlab", version, about = "Spin-chain dynamics and transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides SPINLAB_OUT_DIR and the config's `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random model draws; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Project Onsager currents onto magnetization only (on) or onto discovered charges (off).
    #[arg(long, global = true, value_enum)]
    chaotic: Option<Toggle>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strong conservation and detailed-balance diagnostics of the model.
    Validate,
    /// Commutator-norm grid and light-cone fit.
    LrCone,
    /// Running ray averages of a two-point function.
    RayAverage,
    /// Cumulant decay scan, or partition counts with --count-only.
    Cumulants {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        count_only: bool,
    },
    /// Space-summed, time-averaged correlator.
    Drude,
    /// Euler-scale correlator next to its charge projection.
    Euler,
    /// Green-Kubo estimate and its second-moment decomposition.
    Onsager,
    /// Equilibrium closed forms and the diffusion lower bound.
    Bound,
    /// Gibbs-state stationarity residual on a ring.
    Stationarity,
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(c) = cli.chaotic {
        cfg.onsager.chaotic = c == Toggle::On;
    }
    if let Command::Cumulants { kind: Some(k), .. } = &cli.command {
        cfg.cumulants.kind = match k {
            Kind::Classical => Lattice::All,
            Kind::Noncrossing => Lattice::NonCrossing,
        };
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os("SPINLAB_OUT_DIR").map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, out))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::ConfigInvalid(format!("--threads: {e}")))?;
    }
    let (cfg, out) = configure(cli)?;
    if let Command::Cumulants { n, count_only: true, .. } = &cli.command {
        let n = n.unwrap_or(cfg.cumulants.ops.len());
        println!("{}", spinlab::cumulants::enumerate(n, cfg.cumulants.kind)?.len());
        return Ok(());
    }
    let (artifact, verdict) = match &cli.command {
        Command::Validate => commands::validate(&cfg)?,
        Command::LrCone => (commands::lr_cone(&cfg)?, Ok(())),
        Command::RayAverage => (commands::ray_average(&cfg)?, Ok(())),
        Command::Cumulants { .. } => (commands::cumulants(&cfg)?, Ok(())),
        Command::Drude => (commands::drude(&cfg)?, Ok(())),
        Command::Euler => (commands::euler(&cfg)?, Ok(())),
        Command::Onsager => (commands::onsager(&cfg)?, Ok(())),
        Command::Bound => (commands::bound(&cfg)?, Ok(())),
        Command::Stationarity => commands::stationarity(&cfg)?,
    };
    let (csv, json) = artifact.write(&out, &cfg)?;
    println!("{}", csv.display());
    println!("{}", json.display());
    verdict
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spinlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
