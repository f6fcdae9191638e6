//! Command-line front end: scenario files in, CSV/JSON data and a manifest
//! out. Exit codes: 0 success, 1 config error, 2 invariant violation,
//! 3 resource cap.

pub mod config;
pub mod emit;
pub mod error;
pub mod figures;
pub mod manifest;
pub mod scenario;

use clap::{Parser, Subcommand};
use emit::Format;
use error::{CliError, CliResult};
use manifest::RunManifest;
use std::path::{Path, PathBuf};

/// Overrides every other choice of output directory.
pub const OUTPUT_DIR_ENV: &str = "PAIRDENS_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "pairdens-out";

#[derive(Debug, Parser)]
#[command(name = "pairdens", version, about = "Particle and hole densities from time-dependent fields")]
pub struct Cli {
    /// Output directory (the environment variable takes precedence).
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate a scenario and write densities, numbers and a manifest.
    Run { config: PathBuf },
    /// Two-state fermion pair numbers for several E²/|V|².
    Fig5 {
        /// Inline JSON or @file.
        #[arg(long)]
        overrides: Option<String>,
    },
    /// Two-state boson numbers across the sub- and supercritical regimes.
    Fig6 {
        #[arg(long)]
        overrides: Option<String>,
    },
    /// Compare closed-form densities with the Fock-space oracle.
    OracleCheck { config: PathBuf },
    /// Closed-form two-state numbers on a time grid.
    TwoState {
        #[arg(long = "E", allow_hyphen_values = true)]
        e: f64,
        #[arg(long = "V", allow_hyphen_values = true)]
        v: f64,
        /// Imaginary part of the coupling.
        #[arg(long = "V-im", default_value_t = 0.0, allow_hyphen_values = true)]
        v_im: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 201)]
        samples: usize,
        #[arg(long, value_parser = parse_format, default_value = "csv")]
        format: Format,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        _ => Err(format!("unknown format {s:?} (csv or json)")),
    }
}

/// Environment variable, then flag, then config, then the default.
pub fn resolve_output_dir(flag: Option<&Path>, configured: Option<&str>) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(dir);
    }
    flag.map(Path::to_path_buf)
        .or_else(|| configured.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn dispatch(cli: &Cli) -> CliResult<(RunManifest, PathBuf)> {
    let flag = cli.output_dir.as_deref();
    match &cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
            let cfg = config::parse_config(&text)?;
            let dir = resolve_output_dir(flag, cfg.output.dir.as_deref());
            Ok((scenario::run_scenario(&cfg, Some(&text), &dir)?, dir))
        }
        Command::OracleCheck { config } => {
            let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
            let cfg = config::parse_config(&text)?;
            let dir = resolve_output_dir(flag, cfg.output.dir.as_deref());
            Ok((scenario::oracle_check(&cfg, Some(&text), &dir)?, dir))
        }
        Command::Fig5 { overrides } => {
            let o = figures::parse_overrides(overrides.as_deref())?;
            let dir = resolve_output_dir(flag, None);
            Ok((figures::run_fig5(&o, &dir)?, dir))
        }
        Command::Fig6 { overrides } => {
            let o = figures::parse_overrides(overrides.as_deref())?;
            let dir = resolve_output_dir(flag, None);
            Ok((figures::run_fig6(&o, &dir)?, dir))
        }
        Command::TwoState { e, v, v_im, tmax, samples, format } => {
            let args = figures::TwoStateArgs { e: *e, v: *v, v_im: *v_im, t_max: *tmax, samples: *samples, format: *format };
            let dir = resolve_output_dir(flag, None);
            Ok((figures::run_two_state(&args, &dir)?, dir))
        }
    }
}

/// Runs one command and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let outcome = dispatch(cli).and_then(|(m, dir)| {
        for f in &m.files {
            println!("{}", dir.join(&f.path).display());
        }
        m.into_result()
    });
    match outcome {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
