use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relex_cli::commands::{self, default_out};
use relex_cli::UsageError;

#[derive(Parser)]
#[command(
    name = "relex",
    about = "Agent-driven relation extraction: runs, ablations, sweeps, and SFT export",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = false)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: runs/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run extraction over the evaluation corpus and write metrics plus the
    /// trajectory log.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Run several config variants over the identical sentence set and seed.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated variants, e.g. full,w/oR,w/oM,w/oRM or
        /// retriever:bm25,-samples,-doc,-KG,memory:deep
        #[arg(long, value_delimiter = ',', required = true)]
        variants: Vec<String>,
    },
    /// Evaluate with the retrieval corpus restricted to each n.
    Lowres {
        #[command(flatten)]
        common: Common,
        /// Nondecreasing sample counts, e.g. 0,10,100
        #[arg(long, value_delimiter = ',', required = true)]
        ns: Vec<usize>,
    },
    /// Stream the labelled corpus under each memory variant and score a
    /// held-out probe set at every checkpoint.
    Memcurve {
        #[command(flatten)]
        common: Common,
        /// Nondecreasing stream positions, e.g. 0,5,10
        #[arg(long, value_delimiter = ',', required = true)]
        checkpoints: Vec<usize>,
        /// Probe set size (default: 20% of the training corpus).
        #[arg(long)]
        probe_size: Option<usize>,
    },
    /// Export SFT datasets D and D' from a trajectory log.
    Distill {
        #[command(flatten)]
        common: Common,
        /// Trajectory log from a previous extract run.
        #[arg(long)]
        trajectories: PathBuf,
        /// Skip rationale validation.
        #[arg(long)]
        no_validate: bool,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract { common } => {
            let out = common.out.unwrap_or_else(|| default_out("extract"));
            commands::cmd_extract(&common.config, common.seed, &out)
        }
        Command::Ablate { common, variants } => {
            let out = common.out.unwrap_or_else(|| default_out("ablate"));
            commands::cmd_ablate(&common.config, common.seed, &out, &variants)
        }
        Command::Lowres { common, ns } => {
            let out = common.out.unwrap_or_else(|| default_out("lowres"));
            commands::cmd_lowres(&common.config, common.seed, &out, &ns)
        }
        Command::Memcurve {
            common,
            checkpoints,
            probe_size,
        } => {
            let out = common.out.unwrap_or_else(|| default_out("memcurve"));
            commands::cmd_memcurve(&common.config, common.seed, &out, &checkpoints, probe_size)
        }
        Command::Distill {
            common,
            trajectories,
            no_validate,
        } => {
            let out = common.out.unwrap_or_else(|| default_out("distill"));
            commands::cmd_distill(&common.config, common.seed, &out, &trajectories, no_validate)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|cause| cause.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
