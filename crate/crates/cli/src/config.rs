//! Run configuration: defaults matching the reference N=243 experiment, an
//! optional flat `key=value` config file, and command-line overrides (flags
//! win over the file, the file wins over defaults).

use anyhow::{bail, Context, Result};
use clap::Args;
use std::path::{Path, PathBuf};

/// Options shared by every subcommand. All are optional at the parsing
/// stage; [`Resolved::new`] fills in per-command defaults.
#[derive(Debug, Default, Clone, Args)]
pub struct CommonArgs {
    /// Hilbert-space dimension (multiple of 3)
    #[arg(long)]
    pub n: Option<usize>,
    /// Reflectivity values, comma-separated or repeated
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    /// Maximum orbit period for the scar-function pool
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Number of long-lived resonances entering the performance metric
    #[arg(long)]
    pub nc: Option<usize>,
    /// Eigenvalue matching radius
    #[arg(long)]
    pub eps: Option<f64>,
    /// Performance threshold defining the minimal basis
    #[arg(long)]
    pub target_p: Option<f64>,
    /// Outside-orbit admission count (overrides the per-command policy set)
    #[arg(long)]
    pub nmax_out: Option<usize>,
    /// Phase-space grid side for measures and images
    #[arg(long)]
    pub grid: Option<usize>,
    /// Monte Carlo sample count for classical measures
    #[arg(long)]
    pub samples: Option<u64>,
    /// Base random seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Enable the long (hours) N=729 runs
    #[arg(long)]
    pub large: bool,
}

impl CommonArgs {
    /// Overlay `self` (higher priority) on `base`.
    fn over(self, base: CommonArgs) -> CommonArgs {
        CommonArgs {
            n: self.n.or(base.n),
            r: self.r.or(base.r),
            lmax: self.lmax.or(base.lmax),
            nc: self.nc.or(base.nc),
            eps: self.eps.or(base.eps),
            target_p: self.target_p.or(base.target_p),
            nmax_out: self.nmax_out.or(base.nmax_out),
            grid: self.grid.or(base.grid),
            samples: self.samples.or(base.samples),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            jobs: self.jobs.or(base.jobs),
            large: self.large || base.large,
        }
    }
}

/// Parse a flat `key=value` config file (one pair per line, `#` comments).
/// Keys mirror the long flag names.
pub fn parse_config_file(path: &Path) -> Result<CommonArgs> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let mut cfg = CommonArgs::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), lineno + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        let ctx = || format!("{}:{}: bad value for {key}", path.display(), lineno + 1);
        match key {
            "n" => cfg.n = Some(value.parse().with_context(ctx)?),
            "r" => {
                let mut list = Vec::new();
                for part in value.split(',') {
                    list.push(part.trim().parse().with_context(ctx)?);
                }
                cfg.r = Some(list);
            }
            "lmax" => cfg.lmax = Some(value.parse().with_context(ctx)?),
            "nc" => cfg.nc = Some(value.parse().with_context(ctx)?),
            "eps" => cfg.eps = Some(value.parse().with_context(ctx)?),
            "target_p" => cfg.target_p = Some(value.parse().with_context(ctx)?),
            "nmax_out" => cfg.nmax_out = Some(value.parse().with_context(ctx)?),
            "grid" => cfg.grid = Some(value.parse().with_context(ctx)?),
            "samples" => cfg.samples = Some(value.parse().with_context(ctx)?),
            "seed" => cfg.seed = Some(value.parse().with_context(ctx)?),
            "out" => cfg.out = Some(PathBuf::from(value)),
            "jobs" => cfg.jobs = Some(value.parse().with_context(ctx)?),
            "large" => cfg.large = value.parse().with_context(ctx)?,
            other => bail!("{}:{}: unknown config key `{other}`", path.display(), lineno + 1),
        }
    }
    Ok(cfg)
}

/// Fully resolved configuration for one command invocation.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub n: usize,
    pub r_list: Vec<f64>,
    pub lmax: usize,
    pub nc: usize,
    pub eps: f64,
    pub target_p: f64,
    pub nmax_out: Option<usize>,
    pub grid: usize,
    pub samples: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub large: bool,
    /// Forward/backward evolution horizon of the classical measures.
    pub depth: usize,
}

impl Resolved {
    /// Merge CLI flags over the config file, then fill per-command defaults.
    pub fn new(cli: CommonArgs, file: CommonArgs, default_r: &[f64], default_grid: usize) -> Self {
        let m = cli.over(file);
        Resolved {
            n: m.n.unwrap_or(243),
            r_list: m.r.unwrap_or_else(|| default_r.to_vec()),
            lmax: m.lmax.unwrap_or(7),
            nc: m.nc.unwrap_or(60),
            eps: m.eps.unwrap_or(1e-3),
            target_p: m.target_p.unwrap_or(0.8),
            nmax_out: m.nmax_out,
            grid: m.grid.unwrap_or(default_grid),
            samples: m.samples.unwrap_or(4_000_000),
            seed: m.seed.unwrap_or(7),
            out: m.out.unwrap_or_else(|| PathBuf::from("out")),
            large: m.large,
            depth: 10,
        }
    }
}

/// File-name fragment for a reflectivity value: `0.07` → `0p07`.
pub fn r_tag(r: f64) -> String {
    format!("{r}").replace('.', "p").replace('-', "m")
}
