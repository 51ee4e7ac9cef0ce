use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fuelgame_cli::{dispatch, parse_config};

/// Numerical driver for N-player finite-fuel singular-control games.
#[derive(Parser)]
#[command(name = "fuelgame", version, disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration file ([game]/[numerics]/[run] sections).
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Override the configured time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the configured horizon.
    #[arg(long)]
    horizon: Option<f64>,
    /// Override the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the configured player index.
    #[arg(long)]
    player: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the free boundary, its slope, and the smooth-fit coefficient.
    Boundary(Common),
    /// Evaluate the equilibrium value on a grid of states.
    Value(Common),
    /// Simulate reflected paths; emits one trajectory and endpoint samples.
    Simulate(Common),
    /// Monte Carlo verification: value estimates and deviation tests.
    Verify(Common),
    /// Compare pooling / sharing / dividing values on a grid.
    Compare(Common),
}

fn run() -> Result<bool, (u8, String)> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap prints help/version through the error path with exit 0.
        if e.use_stderr() {
            (1u8, e.to_string())
        } else {
            print!("{e}");
            (0u8, String::new())
        }
    })?;
    let (name, common) = match &cli.command {
        Command::Boundary(c) => ("boundary", c),
        Command::Value(c) => ("value", c),
        Command::Simulate(c) => ("simulate", c),
        Command::Verify(c) => ("verify", c),
        Command::Compare(c) => ("compare", c),
    };

    if let Ok(threads) = std::env::var("FUELGAME_THREADS") {
        let n: usize = threads
            .parse()
            .map_err(|_| (1u8, format!("FUELGAME_THREADS must be a positive integer, got `{threads}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| (1u8, format!("cannot configure thread pool: {e}")))?;
    }

    let text = fs::read_to_string(&common.config)
        .map_err(|e| (1u8, format!("cannot read {}: {e}", common.config.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| (1u8, e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.params.seed = seed;
    }
    if let Some(paths) = common.paths {
        cfg.n_paths = paths;
    }
    if let Some(dt) = common.dt {
        cfg.params.dt = dt;
        cfg.params.delta = dt.sqrt();
    }
    if let Some(horizon) = common.horizon {
        cfg.params.horizon = horizon;
    }
    if let Some(dir) = &common.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(player) = common.player {
        if player >= cfg.spec.n_players() {
            return Err((1u8, format!("--player {player} out of range")));
        }
        cfg.player = player;
    }

    let report = dispatch(name, &cfg).map_err(|e| (1u8, e))?;
    for line in &report.summary {
        println!("{line}");
    }
    println!(
        "{name}: wrote {} under {}",
        report.files.join(", "),
        cfg.output_dir.display()
    );
    Ok(report.accepted)
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance checks failed; see the emitted report");
            ExitCode::from(2)
        }
        Err((code, msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(code)
        }
    }
}
