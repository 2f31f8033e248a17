//! `pobaker` — reproduction runs for the short-periodic-orbit semiclassical
//! treatment of the partially open tribaker map. Each subcommand is a named
//! preset of the reference experiment; flags and an optional flat
//! `key=value` config file override its defaults.

mod cache;
mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use config::{parse_config_file, CommonArgs, Resolved};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pobaker",
    version,
    about = "Partially open tribaker map: classical measures, resonances, and scar-function bases"
)]
struct Cli {
    /// Flat key=value config file (flags override it)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Finite-horizon classical measures (backward, forward, and joint) as
    /// CSV grids and grayscale images
    Measure(CommonArgs),
    /// Exact resonance spectra of the partially open quantum map
    Spectrum(CommonArgs),
    /// Periodic-orbit census with actions, weights, and location flags
    Orbits(CommonArgs),
    /// Minimal scar-basis fraction versus reflectivity, per admission policy
    Sweep(CommonArgs),
    /// Exact and semiclassical quantum-repeller images plus their overlap
    Repeller(CommonArgs),
    /// Run the full reference reproduction: measures, sweep, and repeller
    /// images (add --large for the N=729 spot checks)
    ReproducePaper(CommonArgs),
}

/// Per-command default reflectivity lists and grid sides.
const MEASURE_R: [f64; 4] = [0.0, 0.01, 0.07, 0.2];
const SWEEP_R: [f64; 8] = [0.001, 0.005, 0.01, 0.03, 0.07, 0.1, 0.2, 0.35];
const REPELLER_R: [f64; 2] = [0.07, 0.2];

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file = match &cli.config {
        Some(path) => parse_config_file(path)?,
        None => CommonArgs::default(),
    };

    let resolve = |args: &CommonArgs, default_r: &[f64], default_grid: usize| -> Resolved {
        Resolved::new(args.clone(), file.clone(), default_r, default_grid)
    };
    let jobs = match &cli.cmd {
        Cmd::Measure(a) | Cmd::Spectrum(a) | Cmd::Orbits(a) | Cmd::Sweep(a) | Cmd::Repeller(a)
        | Cmd::ReproducePaper(a) => a.jobs.or(file.jobs),
    };
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .ok();
    }

    match &cli.cmd {
        Cmd::Measure(a) => commands::cmd_measure(&resolve(a, &MEASURE_R, 243)),
        Cmd::Spectrum(a) => commands::cmd_spectrum(&resolve(a, &MEASURE_R, 243)),
        Cmd::Orbits(a) => commands::cmd_orbits(&resolve(a, &[0.07], 243)),
        Cmd::Sweep(a) => commands::cmd_sweep(&resolve(a, &SWEEP_R, 243)),
        Cmd::Repeller(a) => commands::cmd_repeller(&resolve(a, &REPELLER_R, 128)),
        Cmd::ReproducePaper(a) => commands::cmd_reproduce(
            &resolve(a, &MEASURE_R, 243),
            &resolve(a, &SWEEP_R, 243),
            &resolve(a, &REPELLER_R, 128),
        ),
    }
}
