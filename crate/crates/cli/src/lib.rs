pub mod commands;
pub mod config;
pub mod error;
pub mod initial;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "minmax-hj", version, about = "Min-max Hamilton-Jacobi homogenization experiments")]
pub struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Run directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use this single medium seed instead of the configured list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue past failed hypothesis checks.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quasiconvexity, ordering, stable pairs, (M), (M+) and (E).
    Check(RunArgs),
    /// Piece curves, formula, direct estimate and comparison.
    Effective(RunArgs),
    /// Homogenization error against ε.
    SweepEps(RunArgs),
    /// Plot-ready .dat files from a finished run directory.
    Plotdata {
        run_dir: PathBuf,
        /// Defaults to RUN_DIR/plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(args: &RunArgs) -> CliResult<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg = cfg.with_seed(s);
    }
    let out = match (&args.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => relative_to(&args.config, o),
        (None, None) => return Err(CliError::Config("no run directory: pass --out or set `output`".into())),
    };
    Ok((cfg, out))
}

fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or(Path::new(".")).join(p)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads {n}: {e}")))?;
    }
    match &cli.command {
        Command::Check(a) => {
            let (cfg, out) = resolve(a)?;
            commands::cmd_check(&cfg, &out).map(drop)
        }
        Command::Effective(a) => {
            let (cfg, out) = resolve(a)?;
            commands::cmd_effective(&cfg, &out, a.force).map(drop)
        }
        Command::SweepEps(a) => {
            let (cfg, out) = resolve(a)?;
            commands::cmd_sweep_eps(&cfg, &out, a.force).map(drop)
        }
        Command::Plotdata { run_dir, out } => {
            let out = out.clone().unwrap_or_else(|| run_dir.join("plots"));
            for p in commands::cmd_plotdata(run_dir, &out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}
