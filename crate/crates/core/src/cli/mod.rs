//! Command-line runner: config parsing, method dispatch and artifact output.

pub mod config;
pub mod output;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, FamilySpec, Method, Overrides, RunConfig, TargetPreset, TargetSpec, Targets};
pub use run::{execute, execute_locate, Outcome, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_OK};

use crate::evolution::Mode;
use crate::path::Direction;

#[derive(Debug, Parser)]
#[command(name = "epsteer", version, about = "Dwell-time schedules for loops around exceptional points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured method (uniform, stable, optimize, compare or sheets).
    Run(Flags),
    /// Sample eigenvalue sheets on the configured grid.
    Sheets(Flags),
    /// Compare uniform, stable and optimized schedules.
    Compare(Flags),
    /// Locate exceptional points near the loop.
    LocateEps(Flags),
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s.to_ascii_lowercase().as_str() {
        "ccw" => Ok(Direction::Ccw),
        "cw" => Ok(Direction::Cw),
        _ => Err(format!("unknown direction `{s}` (expected ccw or cw)")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "A" | "a" => Ok(Mode::A),
        "B" | "b" => Ok(Mode::B),
        _ => Err(format!("unknown mode `{s}` (expected A or B)")),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON config file; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_parser = parse_direction)]
    pub direction: Option<Direction>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub purity: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method,
            direction: self.direction,
            mode: self.mode,
            p0: self.p0,
            purity: self.purity,
            seed: self.seed,
            out: self.out.clone(),
        }
    }
}

fn configure_threads() -> crate::Result<()> {
    let Ok(v) = std::env::var("EPSTEER_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| crate::Error::config("EPSTEER_THREADS", format!("`{v}` is not a thread count")))?;
    if n > 0 {
        // A pool installed earlier in the process wins; that is fine here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> crate::Result<i32> {
    configure_threads()?;
    let (flags, forced) = match &cli.command {
        Command::Run(f) => (f, None),
        Command::Sheets(f) => (f, Some(Method::Sheets)),
        Command::Compare(f) => (f, Some(Method::Compare)),
        Command::LocateEps(f) => (f, None),
    };
    let mut overrides = flags.overrides();
    if forced.is_some() {
        overrides.method = forced;
    }
    let cfg = parse_config(flags.config.as_deref(), &overrides)?;

    if let Command::LocateEps(_) = cli.command {
        let (eps, artifacts) = execute_locate(&cfg)?;
        artifacts.write_to(&cfg.output_dir)?;
        let list: Vec<String> = eps.iter().map(|p| p.to_string()).collect();
        println!("locate-eps: {} exceptional point(s): {}", eps.len(), list.join(" "));
        return Ok(EXIT_OK);
    }

    let outcome = execute(&cfg)?;
    outcome.artifacts.write_to(&cfg.output_dir)?;
    println!("{}", outcome.summary);
    Ok(outcome.exit_code)
}

/// Parses `args`, runs, and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
