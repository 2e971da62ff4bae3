//! Command-line flags, config files and the validated run configuration.

use std::ops::RangeInclusive;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmot_core::{CostKind, CostMode, CostModel};

use crate::density::{parse_density, DensitySpec};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "mmot", version, about = "Multimarginal optimal transport with repulsive costs")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one level and report duality diagnostics.
    Solve(Opts),
    /// Solve a range of levels and emit the convergence table.
    Converge(Opts),
    /// Check a plan against potentials.
    Verify(Opts),
    /// Apply greedy swap moves to a plan.
    Improve(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Coulomb,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostModeArg {
    /// Pointwise for atomic densities, cell lower bound otherwise.
    Auto,
    Lower,
    Pointwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Csv,
    Kv,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Config file of `key = value` lines using the flag names; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Density: atoms:..., ball:..., gaussian:... or file:<path>.
    #[arg(long)]
    pub density: Option<String>,
    /// Number of marginals.
    #[arg(long = "N", default_value_t = 2)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = CostArg::Coulomb)]
    pub cost: CostArg,
    /// Exponent of the power cost.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    #[arg(long = "cost-mode", value_enum, default_value_t = CostModeArg::Auto)]
    pub cost_mode: CostModeArg,
    #[arg(long, default_value_t = 3)]
    pub level: u32,
    /// Level range `a..b` (inclusive).
    #[arg(long, default_value = "1..4")]
    pub levels: String,
    /// Window half-width.
    #[arg(long = "R", default_value_t = 1.0)]
    pub r: f64,
    /// Machine-readable output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plan file (written by solve, read by verify and improve).
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Potentials file (written by solve, read by verify).
    #[arg(long)]
    pub potentials: Option<PathBuf>,
    #[arg(long = "gap-tol", default_value_t = 1e-8)]
    pub gap_tol: f64,
    #[arg(long = "feas-tol", default_value_t = 1e-9)]
    pub feas_tol: f64,
    #[arg(long = "m-fraction", default_value_t = mmot_core::mmot::DEFAULT_M_FRACTION)]
    pub m_fraction: f64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Recorded in the output; every computation is deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quadrature points per axis and cell for smooth densities.
    #[arg(long = "samples-per-cell", default_value_t = 8)]
    pub samples_per_cell: usize,
    /// Report as JSON instead of key=value lines.
    #[arg(long)]
    pub json: bool,
    /// Table format for converge.
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    pub format: TableFormat,
    /// Fill the wall-time column of the convergence table.
    #[arg(long)]
    pub timing: bool,
    /// Swap rounds for improve.
    #[arg(long = "max-rounds", default_value_t = 100)]
    pub max_rounds: usize,
    /// Move log for improve (default: standard error).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubcommandKind {
    Solve,
    Converge,
    Verify,
    Improve,
}

/// Validated configuration of one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: SubcommandKind,
    pub density: Option<DensitySpec>,
    pub model: CostModel,
    pub levels: RangeInclusive<u32>,
    pub opts: Opts,
}

impl RunConfig {
    pub fn cost_mode(&self) -> CostMode {
        match self.opts.cost_mode {
            CostModeArg::Lower => CostMode::CellLower,
            CostModeArg::Pointwise => CostMode::Pointwise,
            CostModeArg::Auto => {
                if self.density.as_ref().is_some_and(DensitySpec::is_atomic) {
                    CostMode::Pointwise
                } else {
                    CostMode::CellLower
                }
            }
        }
    }

    /// Cost model with a different marginal count (verify and improve take it from the plan).
    pub fn model_for(&self, n: usize) -> Result<CostModel, CliError> {
        Ok(CostModel::new(self.model.kind, n)?)
    }
}

pub fn parse_levels(text: &str) -> Result<RangeInclusive<u32>, CliError> {
    let bad = || CliError::Config(format!("levels: expected a..b, found `{text}`"));
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (text, text),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a > b {
        return Err(CliError::Config(format!("level range {a}..{b} is empty")));
    }
    Ok(a..=b)
}

/// Turns `key = value` lines into flags placed before the command-line ones.
pub fn config_args(text: &str) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "config" {
            return Err(CliError::Config("config files cannot include other config files".into()));
        }
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices config-file flags in front of the command-line flags so that the
/// latter override.
pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read config {path}: {e}")))?;
    let extra = config_args(&text)?;
    let mut out = argv;
    // after the program name and the subcommand
    let at = out.len().min(2);
    out.splice(at..at, extra);
    Ok(out)
}

pub fn build(cli: Cli) -> Result<RunConfig, CliError> {
    let (subcommand, opts) = match cli.command {
        Command::Solve(o) => (SubcommandKind::Solve, o),
        Command::Converge(o) => (SubcommandKind::Converge, o),
        Command::Verify(o) => (SubcommandKind::Verify, o),
        Command::Improve(o) => (SubcommandKind::Improve, o),
    };
    if opts.n < 2 {
        return Err(CliError::Config(format!("--N must be at least 2, got {}", opts.n)));
    }
    if !(opts.s > 0.0 && opts.s.is_finite()) {
        return Err(CliError::Config(format!("--s must be positive, got {}", opts.s)));
    }
    if !(opts.r > 0.0 && opts.r.is_finite()) {
        return Err(CliError::Config(format!("--R must be positive, got {}", opts.r)));
    }
    for (name, v) in [("--gap-tol", opts.gap_tol), ("--feas-tol", opts.feas_tol)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Config(format!("{name} must be positive, got {v}")));
        }
    }
    if !(opts.m_fraction > 0.0 && opts.m_fraction < 1.0) {
        return Err(CliError::Config(format!("--m-fraction must lie in (0, 1), got {}", opts.m_fraction)));
    }
    if opts.samples_per_cell == 0 {
        return Err(CliError::Config("--samples-per-cell must be positive".into()));
    }
    if opts.threads == Some(0) {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    let kind = match opts.cost {
        CostArg::Coulomb => CostKind::Coulomb,
        CostArg::Power => CostKind::Power(opts.s),
    };
    let model = CostModel::new(kind, opts.n)?;
    let levels = parse_levels(&opts.levels)?;
    let density = opts.density.as_deref().map(parse_density).transpose()?;
    let needs = |what: bool, flag: &str| {
        if what {
            Ok(())
        } else {
            Err(CliError::Config(format!("{flag} is required")))
        }
    };
    match subcommand {
        SubcommandKind::Solve | SubcommandKind::Converge => needs(density.is_some(), "--density")?,
        SubcommandKind::Verify => {
            needs(opts.plan.is_some(), "--plan")?;
            needs(opts.potentials.is_some(), "--potentials")?;
        }
        SubcommandKind::Improve => needs(opts.plan.is_some(), "--plan")?,
    }
    Ok(RunConfig {
        subcommand,
        density,
        model,
        levels,
        opts,
    })
}
