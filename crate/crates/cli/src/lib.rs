//! The `mmot` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid configuration or unreadable input,
//! 3 solver error, 4 verification failure. Machine output goes to standard
//! output (or `--out`), the human summary to standard error.

mod commands;
pub mod config;
pub mod density;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use thiserror::Error;

pub use commands::table_exit_code;
pub use config::{Cli, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] mmot_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mmot_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Verification(_) => EXIT_VERIFY,
            CliError::Core(e) => match e {
                E::NumericalBreakdown(_)
                | E::InsufficientSupport { .. }
                | E::NoFiniteCostPlan
                | E::NoOffDiagonalSupport
                | E::OverlappingNeighborhoods { .. }
                | E::EmptyRestriction(_) => EXIT_SOLVER,
                _ => EXIT_CONFIG,
            },
        }
    }
}

/// Runs the tool on `argv` (program name first) with the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = argv
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let result = config::expand_config(argv).and_then(|argv| match Cli::try_parse_from(argv) {
        Ok(cli) => config::build(cli).map(Some),
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = write!(stdout, "{}", e.render());
            Ok(None)
        }
        Err(e) => {
            let text = e.render().to_string();
            let text = text.trim_end();
            Err(CliError::Config(text.strip_prefix("error: ").unwrap_or(text).to_string()))
        }
    });
    let outcome = match result {
        Ok(None) => return EXIT_OK,
        Ok(Some(cfg)) => run_config(&cfg, stdout, stderr),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "mmot-error: {e}");
            e.exit_code()
        }
    }
}

/// Executes a validated configuration inside a pool of `--threads` workers.
pub fn run_config(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.opts.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))?;
    // buffered so the pool workers never touch the caller's streams
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let result = pool.install(|| commands::dispatch(cfg, &mut out, &mut err));
    let _ = stderr.write_all(&err);
    stdout
        .write_all(&out)
        .map_err(|e| CliError::Config(format!("stdout: {e}")))?;
    result
}
