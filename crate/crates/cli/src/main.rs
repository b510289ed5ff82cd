//! Command-line front end for the sparsity pipeline.
//!
//! Exit codes: 0 on success, 1 for validation problems (bad inputs, missing
//! files, malformed payloads), 2 for violated internal invariants.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "flexsparse",
    about = "Layer-wise N:M sparsity planning and compute-in-memory simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-layer outlier statistics (counts, O, D, ND).
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        /// Outlier threshold multiplier over the score stddev.
        #[arg(long, default_value_t = 3.0)]
        tau: f64,
        #[arg(long, default_value_t = 128)]
        block_size: usize,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign an N:M pattern to every layer from an analysis report.
    Plan {
        #[arg(long)]
        analysis: PathBuf,
        #[arg(long, value_parser = ["constrained", "unconstrained"], default_value = "constrained")]
        mode: String,
        #[arg(long)]
        target_sparsity: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 4.0)]
        beta: f64,
        #[arg(long, default_value_t = 8.0)]
        k: f64,
        #[arg(long, default_value_t = 8.0)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a plan: write compressed tensors and a pruned manifest.
    Prune {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate cycles and energy across all architecture models.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Simulator configuration JSON (macro, systolic, energy table).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        tokens: usize,
        /// Directory of compressed tensors; enables bit-true verification.
        #[arg(long)]
        pruned_dir: Option<PathBuf>,
        /// Seed for the verification activations, echoed in the report.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic model.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        layers: usize,
        #[arg(long, default_value_t = 256)]
        rows: usize,
        #[arg(long, default_value_t = 256)]
        cols: usize,
        #[arg(long, value_parser = ["clustered", "scattered", "mixed"], default_value = "mixed")]
        profile: String,
        /// Override the per-role outlier fraction.
        #[arg(long)]
        outlier_fraction: Option<f64>,
    },
    /// Render a simulation report as a table and optional CSV.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<flexsparse_core::Error>() {
        Some(core_err) if core_err.is_internal() => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Analyze {
            manifest,
            tau,
            block_size,
            out,
        } => commands::analyze(&manifest, tau, block_size, out.as_deref()),
        Command::Plan {
            analysis,
            mode,
            target_sparsity,
            alpha,
            beta,
            k,
            h,
            out,
        } => commands::plan(
            &analysis,
            &mode,
            target_sparsity,
            (alpha, beta, k, h),
            out.as_deref(),
        ),
        Command::Prune {
            manifest,
            plan,
            out,
        } => commands::prune(&manifest, &plan, &out),
        Command::Simulate {
            manifest,
            plan,
            config,
            tokens,
            pruned_dir,
            seed,
            out,
            csv,
        } => commands::simulate(
            &manifest,
            &plan,
            config.as_deref(),
            tokens,
            pruned_dir.as_deref(),
            seed,
            out.as_deref(),
            csv.as_deref(),
        ),
        Command::GenSynthetic {
            out,
            seed,
            layers,
            rows,
            cols,
            profile,
            outlier_fraction,
        } => commands::gen_synthetic(&out, seed, layers, rows, cols, &profile, outlier_fraction),
        Command::Report { report, csv } => commands::report(&report, csv.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn internal_invariants_map_to_exit_2() {
        let internal: anyhow::Error =
            flexsparse_core::Error::Internal("wiring mismatch".into()).into();
        assert_eq!(exit_code_for(&internal), 2);
        let validation: anyhow::Error =
            flexsparse_core::Error::Manifest("bad manifest".into()).into();
        assert_eq!(exit_code_for(&validation), 1);
        let layered: anyhow::Error = flexsparse_core::Error::Internal("x".into())
            .for_layer("blk")
            .into();
        assert_eq!(exit_code_for(&layered), 2);
    }
}
