//! Command-line driver: configuration, dispatch and report emission.

pub mod commands;
pub mod config;
pub mod report;

use clap::{Parser, Subcommand};
use commands::{CommandError, Context, SbtMode};
use serde_json::Value;
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_BREACH: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "monosphere",
    version,
    about = "Coherent states and Segal-Bargmann transform for a charged particle on the sphere"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (flat TOML table).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Exit with code 3 if any tolerance is breached.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Truncation as twice j_max; overrides the config.
    #[arg(long, global = true)]
    pub jmax: Option<i32>,
    /// Heat time τ; overrides the derived value and is flagged in reports.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Husimi grid as `SxT`: S radial cells, T polar cells (2T azimuthal).
    #[arg(long, global = true, default_value = "8x8")]
    pub grid: String,
    /// Isometry check per sector (zero twist) or on a random state.
    #[arg(long, global = true, value_enum, default_value = "sector")]
    pub mode: SbtMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Derived magnetic field, heat time and flux integer.
    Params,
    /// Magnetic geodesic flow from a seeded phase point.
    Trajectory,
    /// Complexifier map and its inverse on seeded phase points.
    Amap,
    /// Residuals of the operator relations.
    Operators,
    /// Coherent state at a seeded complex point.
    Coherent,
    /// Husimi function of a seeded coherent state.
    Husimi,
    /// Segal-Bargmann isometry checks.
    Sbt,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Params => "params",
            Command::Trajectory => "trajectory",
            Command::Amap => "amap",
            Command::Operators => "operators",
            Command::Coherent => "coherent",
            Command::Husimi => "husimi",
            Command::Sbt => "sbt",
        }
    }

    fn report_name(self, mode: SbtMode) -> &'static str {
        match (self, mode) {
            (Command::Operators, _) => "relations.json",
            (Command::Sbt, SbtMode::Full) => "isometry.json",
            (Command::Params, _) => "params.json",
            (Command::Trajectory, _) => "trajectory.json",
            (Command::Amap, _) => "amap.json",
            (Command::Coherent, _) => "coherent.json",
            (Command::Husimi, _) => "husimi.json",
            (Command::Sbt, SbtMode::Sector) => "sbt.json",
        }
    }
}

fn parse_grid(text: &str) -> Option<(usize, usize)> {
    let (s, t) = text.split_once(['x', 'X'])?;
    let (s, t) = (s.trim().parse().ok()?, t.trim().parse().ok()?);
    (s > 0 && t > 0).then_some((s, t))
}

/// The command line as recorded in reports: the subcommand and the flags
/// that change results, in a fixed order. Paths are left out so that
/// reports do not depend on where files live.
fn command_line(cli: &Cli) -> String {
    let mut s = format!("monosphere {}", cli.command.name());
    if cli.strict {
        s.push_str(" --strict");
    }
    if let Some(j) = cli.jmax {
        s.push_str(&format!(" --jmax {j}"));
    }
    if let Some(t) = cli.tau {
        s.push_str(&format!(" --tau {t:?}"));
    }
    if cli.command == Command::Husimi {
        s.push_str(&format!(" --grid {}", cli.grid));
    }
    if cli.command == Command::Sbt {
        s.push_str(match cli.mode {
            SbtMode::Sector => " --mode sector",
            SbtMode::Full => " --mode full",
        });
    }
    s
}

fn configure_threads() {
    if let Some(n) = std::env::var("MONOSPHERE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    let Some(path) = cli.config.as_ref() else {
        eprintln!("error: --config PATH is required");
        return EXIT_USAGE;
    };
    let cfg = match config::parse_config(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let Some(grid) = parse_grid(&cli.grid) else {
        eprintln!("error: --grid expects SxT with positive integers, got `{}`", cli.grid);
        return EXIT_USAGE;
    };
    let mut params = cfg.params().expect("validated config");
    if let Some(t) = cli.tau {
        params = match params.with_tau(t) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: --tau: {e}");
                return EXIT_USAGE;
            }
        };
    }
    let tau_overridden = cli.tau.is_some() || cfg.tau_override.is_some();
    let ctx = Context {
        twice_j_max: cli.jmax.unwrap_or(cfg.twice_j_max),
        cfg: cfg.clone(),
        params,
        out: cli.out.clone(),
        grid,
        mode: cli.mode,
    };
    let result = match cli.command {
        Command::Params => commands::params(&ctx),
        Command::Trajectory => commands::trajectory(&ctx),
        Command::Amap => commands::amap(&ctx),
        Command::Operators => commands::operators(&ctx),
        Command::Coherent => commands::coherent(&ctx),
        Command::Husimi => commands::husimi(&ctx),
        Command::Sbt => commands::sbt(&ctx),
    };
    let body = match result {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                CommandError::Usage(_) => EXIT_USAGE,
                CommandError::Numerical(_) | CommandError::Io(_) => EXIT_NUMERICAL,
            };
        }
    };
    let mut report = report::envelope(cli.command.name(), &command_line(&cli), &cfg, tau_overridden);
    report.extend(body);
    let report = Value::Object(report);
    let name = cli.command.report_name(cli.mode);
    if let Err(e) = report::write_atomic(&ctx.out, name, report::to_json_text(&report).as_bytes()) {
        eprintln!("error: writing {name}: {e}");
        return EXIT_NUMERICAL;
    }
    let breach = report::has_breach(&report);
    if cli.command == Command::Params {
        let p = &ctx.params;
        println!("B = {}", report::f17(p.b));
        println!("tau = {}", report::f17(p.tau));
        println!("flux integer = {}", p.flux_number().round() as i64);
    }
    println!(
        "{}: wrote {} ({})",
        cli.command.name(),
        ctx.out.join(name).display(),
        if breach { "breach" } else { "ok" }
    );
    if cli.strict && breach {
        EXIT_BREACH
    } else {
        EXIT_OK
    }
}
