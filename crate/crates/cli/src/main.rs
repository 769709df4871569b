use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use tomoinv_cli::commands::{self, PRESETS};
use tomoinv_cli::RunArgs;

#[derive(Parser)]
#[command(
    name = "tomoinv",
    version,
    about = "Divergent-beam and Radon reconstruction of analytic phantoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write X-ray samples or Radon profiles of a phantom
    Forward(RunArgs),
    /// Reconstruct a volume and score it against the phantom
    Invert(RunArgs),
    /// Grangeat sweep and line-transform/Hilbert balance report
    Check(RunArgs),
    /// Fit the reconstruction normalization by least squares
    Calibrate(RunArgs),
    /// Write a preset phantom file
    PhantomGen {
        #[arg(long, value_parser = PRESETS)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Forward(a) => report(&commands::forward(&a.resolve()?)?),
        Command::Invert(a) => {
            let (inv, files) = commands::invert(&a.resolve()?)?;
            report(&files);
            match inv.metrics.rel_l2 {
                Some(e) => println!("rel_l2 {e:.3e}, max_err {:.3e}", inv.metrics.max_error),
                None => println!(
                    "rel_l2 {}, max_err {:.3e}",
                    commands::UNDEFINED,
                    inv.metrics.max_error
                ),
            }
        }
        Command::Check(a) => report(&commands::check(&a.resolve()?)?),
        Command::Calibrate(a) => {
            let (cal, files) = commands::calibrate(&a.resolve()?)?;
            report(&files);
            println!(
                "normalization {} (residual {:.3e})",
                cal.normalization, cal.residual
            );
        }
        Command::PhantomGen { preset, out } => {
            commands::phantom_gen(&preset, &out)?;
            report(&[out]);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
