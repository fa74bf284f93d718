//! `holonomy`: scenario-driven front end for trajectory phases.
//!
//! Exit codes: 0 success, 2 invalid input, 3 enumeration too large,
//! 4 numerical failure. Output is buffered and written only on success.

mod commands;
mod failure;
mod output;
mod scenario;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Flags;
use failure::Failure;
use scenario::{load_mixers, Scenario};

#[derive(Parser)]
#[command(
    name = "holonomy",
    version,
    about = "Geometric phases of quantum trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Print a CSV table instead of NDJSON records.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct Averaging {
    /// Trajectories at or below this weight are left out.
    #[arg(long)]
    min_weight: Option<f64>,
    /// Mix every state with the maximally mixed state by this amount
    /// before transport (mixed inputs only).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Append the first state to each path before transport.
    #[arg(long, value_name = "BOOL", action = clap::ArgAction::Set)]
    close_loop: Option<bool>,
}

impl Averaging {
    fn flags(&self) -> Flags {
        Flags {
            min_weight: self.min_weight,
            epsilon: self.epsilon,
            close_loop: self.close_loop,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// List every trajectory with its weight and phase.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        averaging: Averaging,
    },
    /// Draw trajectories by simulated environment measurements.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Number of samples.
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Master seed; per-sample seeds are derived from it.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the interferometric phase measurement along one trajectory.
    Interfere {
        #[command(flatten)]
        common: Common,
        /// Kraus outcome per step, e.g. "0,1,0". Defaults to all zeros.
        #[arg(long)]
        trajectory: Option<String>,
        /// Number of phase-shifter settings per fringe.
        #[arg(long)]
        grid: Option<usize>,
        /// Write one two-column (chi, intensity) file per interferometer.
        #[arg(long)]
        fringe_dir: Option<PathBuf>,
    },
    /// Average trajectory phases, optionally across Kraus decompositions.
    Average {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        averaging: Averaging,
        /// Decompositions to compare with the original one (JSON).
        #[arg(long)]
        mixers: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("HOLONOMY_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            Failure::usage(
                "Environment",
                format!("HOLONOMY_THREADS must be a positive integer, got `{value}`"),
            )
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::usage("Environment", e.to_string()))
}

fn run(cli: Cli) -> Result<String, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Enumerate { common, averaging } => {
            let sc = Scenario::load(&common.scenario)?;
            commands::enumerate(&sc, &averaging.flags(), common.csv)
        }
        Command::Sample { common, n, seed } => {
            let sc = Scenario::load(&common.scenario)?;
            commands::sample_cmd(&sc, n, seed, common.csv)
        }
        Command::Interfere {
            common,
            trajectory,
            grid,
            fringe_dir,
        } => {
            let sc = Scenario::load(&common.scenario)?;
            let out = commands::interfere(
                &sc,
                trajectory.as_deref(),
                grid,
                fringe_dir.as_ref(),
                common.csv,
            )?;
            if let Some(dir) = &fringe_dir {
                fs::create_dir_all(dir)
                    .map_err(|e| Failure::usage("Io", format!("{}: {e}", dir.display())))?;
            }
            for (path, bytes) in &out.fringes {
                fs::write(path, bytes)
                    .map_err(|e| Failure::usage("Io", format!("{}: {e}", path.display())))?;
            }
            Ok(out.stdout)
        }
        Command::Average {
            common,
            averaging,
            mixers,
        } => {
            let sc = Scenario::load(&common.scenario)?;
            let decompositions = mixers.map(|p| load_mixers(&p, &sc)).transpose()?;
            commands::average(&sc, &averaging.flags(), decompositions, common.csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            if stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(failure) => {
            eprintln!("{failure}");
            ExitCode::from(failure.code as u8)
        }
    }
}
