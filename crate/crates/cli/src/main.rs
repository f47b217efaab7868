use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use formprobe_core::probe::{
    bridge_check, estimate_probe_interior, estimate_probe_weighted, halfspace_probe, run_identity_suite, EstimateConfig, MediaChoice,
    ProbeReport,
};

#[derive(Parser)]
#[command(name = "formprobe", version, about = "Probe identities and regularity estimates for differential forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every operator identity over all ranks in one dimension.
    Identities {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the regularity-estimate ratio over a random ensemble.
    Estimate {
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 0)]
        order: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        weight: f64,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        /// id, scalar, algebraic or file:PATH.
        #[arg(long, default_value = "id")]
        media: String,
        #[arg(long, default_value_t = 50)]
        ensemble: usize,
        #[arg(long, default_value_t = 32)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-sample ratios as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the vector-calculus correspondences in three dimensions.
    Bridge {
        #[arg(long)]
        check: bool,
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Interior,
    Weighted,
    Halfspace,
}

fn emit(report: &ProbeReport, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            report.write_json(BufWriter::new(file))?;
        }
        None => report.write_json(io::stdout().lock())?,
    }
    let mut err = io::stderr().lock();
    for flag in report.flags.iter().filter(|f| f.asserted) {
        let mark = if flag.passed { "pass" } else { "FAIL" };
        writeln!(err, "{mark}  {}  worst {:.3e}  tolerance {:.3e}", flag.name, flag.worst, flag.tolerance)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let report = match cli.command {
        Command::Identities { dim, grid, seed, out } => {
            let r = run_identity_suite(dim, grid, seed)?;
            emit(&r, out.as_ref())?;
            r
        }
        Command::Estimate {
            variant,
            dim,
            rank,
            order,
            weight,
            tau,
            media,
            ensemble,
            grid,
            seed,
            out,
            csv,
        } => {
            let cfg = EstimateConfig {
                dim,
                rank,
                order,
                weight,
                tau,
                media: MediaChoice::parse(&media)?,
                ensemble,
                grid,
                seed,
            };
            let r = match variant {
                Variant::Interior => estimate_probe_interior(&cfg)?,
                Variant::Weighted => estimate_probe_weighted(&cfg)?,
                Variant::Halfspace => halfspace_probe(&cfg)?,
            };
            emit(&r, out.as_ref())?;
            if let Some(path) = csv {
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                r.write_csv(BufWriter::new(file))?;
            }
            r
        }
        Command::Bridge { check, count, seed, out } => {
            anyhow::ensure!(check, "nothing to do: pass --check");
            let r = bridge_check(seed, count)?;
            emit(&r, out.as_ref())?;
            r
        }
    };
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
