use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zdq_cli::commands;
use zdq_cli::error::exit;
use zdq_cli::{CliError, Context, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "zdq", version, about = "Zero-delay quantization of finite-alphabet Markov sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Base seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, global = true, value_name = "N", env = "ZDQ_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the average-cost problem and report coupling constants.
    Solve,
    /// Finite-horizon cost of the stationary policy against the bound K/T.
    Converge {
        /// Reuse a triplet written by `solve`.
        #[arg(long, value_name = "PATH")]
        triplet: Option<PathBuf>,
    },
    /// Periodic restarted policies for each configured epsilon.
    Periodic {
        #[arg(long, value_name = "PATH")]
        triplet: Option<PathBuf>,
    },
    /// Compare finite-horizon DP against exhaustive search.
    OracleCheck,
    /// Run encoder/decoder sessions and write a trace.
    Simulate {
        #[arg(long, value_name = "PATH")]
        triplet: Option<PathBuf>,
    },
    /// Coupling-time matrix and constants.
    Couple,
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let config = ExperimentConfig::load(&path)?;
    let mut ctx = Context::new(config, cli.out.as_deref(), cli.seed);
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Converge { triplet } => {
            ctx.triplet = triplet;
            commands::converge(&ctx)
        }
        Command::Periodic { triplet } => {
            ctx.triplet = triplet;
            commands::periodic(&ctx)
        }
        Command::OracleCheck => commands::oracle_check(&ctx),
        Command::Simulate { triplet } => {
            ctx.triplet = triplet;
            commands::simulate(&ctx)
        }
        Command::Couple => commands::couple(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::from(exit::SUCCESS as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
