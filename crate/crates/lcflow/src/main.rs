//! Command-line front end: parse a JSON run config, execute it, and map
//! errors onto the documented exit statuses (1 usage/config, 2 runtime
//! invariant violation).

use clap::{Parser, Subcommand};
use lcflow::experiment::{run_config, CommandKind, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lcflow",
    about = "Constrained curvature flows of starshaped hypersurfaces in hyperbolic space",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the extrinsic geometry and identity residuals of a shape.
    Geometry(CommonArgs),
    /// Integrate a flow and record the monitored functionals.
    Simulate(CommonArgs),
    /// Evaluate the curvature-weighted inequality on sampled shapes.
    Verify(CommonArgs),
    /// Re-audit a previously written series CSV.
    Audit(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV/JSON artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

fn expected_kind(cmd: &Command) -> CommandKind {
    match cmd {
        Command::Geometry(_) => CommandKind::Geometry,
        Command::Simulate(_) => CommandKind::Simulate,
        Command::Verify(_) => CommandKind::Verify,
        Command::Audit(_) => CommandKind::Audit,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let expected = expected_kind(&cli.command);
    let args = match cli.command {
        Command::Geometry(a) | Command::Simulate(a) | Command::Verify(a) | Command::Audit(a) => a,
    };

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if cfg.command != expected {
        eprintln!(
            "error: config command `{}` does not match subcommand `{}`",
            cfg.command, expected
        );
        return ExitCode::from(1);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create output directory {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    match run_config(&cfg, &args.out, args.quiet) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
