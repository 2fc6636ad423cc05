use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levy_sieve::harness::{self, RunOverrides};

#[derive(Parser)]
#[command(name = "levy-sieve", version, about = "Penalized projection estimation of Lévy densities: config-driven Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        /// Path to a flat key = value config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out`).
        #[arg(long)]
        out: Option<String>,
        /// Base seed (overrides the config's `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Replication count (overrides the config's `reps`).
        #[arg(long)]
        reps: Option<u64>,
        /// Worker thread count (defaults to the number of cores).
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            reps,
            threads,
        } => {
            if let Some(n) = threads {
                // ignore failure: the global pool can only be set once
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            let overrides = RunOverrides { out, seed, reps };
            match harness::run(&config, &overrides) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
