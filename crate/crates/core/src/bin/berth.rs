use std::path::PathBuf;
use std::process::ExitCode;

use berth_core::harness::{cli_eval, cli_replay, cli_train, EvalOptions, Profile, TrainOptions};
use clap::{Parser, Subcommand};

/// Train and evaluate a reinforcement-learning ship berthing controller.
#[derive(Parser)]
#[command(name = "berth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write logs and checkpoints into a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the profile named in the config file.
        #[arg(long)]
        profile: Option<Profile>,
        /// Parallel rollout workers; only a single worker is bit-reproducible.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Roll a checkpoint deterministically from a set of start poses.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// CSV file (eta0,xi0,psi0_deg) or grid:RxC, random:COUNT:SEED, extrap:COUNT:SEED.
        #[arg(long)]
        starts: String,
        #[arg(long)]
        out: PathBuf,
        /// End each episode as soon as the goal circle is reached.
        #[arg(long)]
        early_stop: bool,
    },
    /// Re-render the plots of a trajectory CSV.
    Replay {
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BERTH_LOG", "info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            seed,
            out,
            profile,
            workers,
        } => cli_train(&TrainOptions {
            config,
            seed,
            out,
            profile,
            workers,
        })
        .map(|s| {
            println!(
                "trained {} updates over {} episodes; best checkpoint at update {} ({} validation successes)",
                s.updates, s.episodes, s.best_update, s.best_validation_successes
            )
        }),
        Command::Eval {
            checkpoint,
            starts,
            out,
            early_stop,
        } => cli_eval(&EvalOptions {
            checkpoint,
            starts,
            out,
            early_stop,
        })
        .map(|r| {
            println!(
                "interpolated: {}/{} succeeded; extrapolated: {}/{} succeeded",
                r.interpolated_success, r.interpolated, r.extrapolated_success, r.extrapolated
            )
        }),
        Command::Replay { traj, out } => cli_replay(&traj, &out).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
