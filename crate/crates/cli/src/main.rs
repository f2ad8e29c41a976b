//! `stokeslip` driver: one subcommand per study, TOML experiment
//! configs, cached meshes, and a manifest per run directory.
//!
//! Exit codes: 0 clean, 2 completed with flagged results, 1 failure.

mod config;
mod manifest;
mod studies;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Study;
use manifest::Workspace;

#[derive(Parser)]
#[command(name = "stokeslip", version, about = "Numerical studies of the dynamic-slip Stokes problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base RNG seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 keeps the library default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Replace the single-level mesh size `h`.
    #[arg(long, value_name = "H")]
    level_override: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-data resolvent solves with error and ratio tables.
    Resolvent(Shared),
    /// Resolvent norm sweep over a sector grid.
    Sweep(Shared),
    /// Korn quotients on the configured domain and a reference disk.
    Korn(Shared),
    /// Backward Euler trace for the manufactured decay solution.
    Evolve(Shared),
    /// Maximal regularity ratios over a random forcing ensemble.
    Maxreg(Shared),
    /// Refinement ladder with fitted convergence orders.
    Convergence(Shared),
    /// Trace-space norm comparison between both realizations.
    Interp(Shared),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (study, shared) = match cli.command {
        Command::Resolvent(s) => (Study::Resolvent, s),
        Command::Sweep(s) => (Study::Sweep, s),
        Command::Korn(s) => (Study::Korn, s),
        Command::Evolve(s) => (Study::Evolve, s),
        Command::Maxreg(s) => (Study::Maxreg, s),
        Command::Convergence(s) => (Study::Convergence, s),
        Command::Interp(s) => (Study::Interp, s),
    };
    match run(study, &shared) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(study: Study, shared: &Shared) -> Result<bool, String> {
    let text = std::fs::read_to_string(&shared.config)
        .map_err(|e| format!("reading {}: {e}", shared.config.display()))?;
    let raw = config::parse(&text)?;
    let mut cfg = config::validate(&raw, study).map_err(|violations| {
        let mut msg = String::from("invalid config:");
        for v in &violations {
            msg.push_str("\n  ");
            msg.push_str(v);
        }
        msg
    })?;

    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    if let Some(h) = shared.level_override {
        if !(h.is_finite() && h > 0.0) {
            return Err(format!("--level-override must be a positive real, got {h}"));
        }
        cfg.h = h;
    }
    if shared.threads > 0 {
        // a second run in the same process keeps the first pool; fine
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(shared.threads)
            .build_global();
    }

    let out = shared
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .ok_or("no output directory: pass --out or set `out` in the config")?;
    let mut ws = Workspace::create(&out).map_err(|e| format!("creating {}: {e}", out.display()))?;

    let flagged = studies::run(&cfg, &mut ws)?;
    ws.finish(study.name(), &text, cfg.seed)
        .map_err(|e| format!("writing manifest: {e}"))?;
    println!(
        "{} study finished in {}{}",
        study,
        out.display(),
        if flagged { " (flagged)" } else { "" }
    );
    Ok(flagged)
}
