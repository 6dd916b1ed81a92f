use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use beamspace_cli::commands::{execute, replay, write_run, Invocation};
use beamspace_cli::config::{load, ArraySpec, Overrides};
use beamspace_cli::formats::{parse_grid, GridJson};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beamspace",
    version,
    about = "Beamspace multi-user hybrid beamforming simulator"
)]
struct Cli {
    /// Worker threads for trial parallelism (default: all cores). Outputs do
    /// not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config merged over the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// u2-paper, u4-paper, u2-desk, u4-desk or fig6-desk.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write one ground-truth scenario file per trial.
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Monte Carlo sum-SE sweep over EIRP and strategies.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated: full_csi, ground_truth_beamspace, algorithm1,
        /// beam_prediction.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// ground_truth, perturbed:<std_deg> or file:<path>.
        #[arg(long)]
        estimator: Option<String>,
    },
    /// BCE, SSCL, MAD and MAE-in-cosines of predictions against truth.
    Losses {
        /// AoD-list JSON (one object or an array).
        #[arg(long)]
        truth: PathBuf,
        /// Prediction-grid JSON (one object or an array).
        #[arg(long = "pred")]
        predictions: PathBuf,
        /// Soft-encoding decay range, degrees.
        #[arg(long, default_value_t = 10.0)]
        delta: f64,
        /// Encoding grid, azimuth x elevation bins.
        #[arg(long, default_value = "90x45")]
        grid: String,
        /// Write losses.json and a manifest here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Link-establishment overhead of beam sweeping vs. per-RF-chain pilots.
    Overhead {
        #[arg(long, default_value_t = 10)]
        n_rf: usize,
        /// Subcarrier spacing, Hz.
        #[arg(long, default_value_t = 120e3)]
        scs: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Beamspace of AoD-list JSON on an angle grid.
    ComputeBeamspace {
        #[arg(long)]
        aods: PathBuf,
        #[arg(long, default_value = "64x64")]
        grid: String,
        /// Array size, n_x x n_y.
        #[arg(long, default_value = "8x4")]
        array: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).with_context(|| format!("cannot resolve {}", p.display()))
}

fn grid(s: &str) -> Result<GridJson> {
    let (g_theta, g_phi) = parse_grid(s)?;
    Ok(GridJson { g_theta, g_phi })
}

/// Writes to `out` with a manifest, or prints the single output.
fn emit(inv: Invocation, out: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    match out {
        Some(dir) => {
            write_run(&inv, &dir, None, threads)?;
        }
        None => {
            for (_, bytes) in execute(&inv, threads)? {
                print!("{}", String::from_utf8_lossy(&bytes));
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let threads = cli.threads;
    match cli.command {
        Command::Generate { run } => {
            let ov = Overrides {
                preset: run.preset,
                seed: run.seed,
                trials: run.trials,
                ..Default::default()
            };
            let config = load(run.config.as_deref(), &ov)?;
            let m = write_run(
                &Invocation::Generate { config },
                &run.out,
                run.config.as_deref(),
                threads,
            )?;
            eprintln!("wrote {} files to {}", m.outputs.len(), run.out.display());
        }
        Command::Sweep {
            run,
            strategies,
            estimator,
        } => {
            let ov = Overrides {
                preset: run.preset,
                seed: run.seed,
                trials: run.trials,
                strategies,
                estimator,
            };
            let config = load(run.config.as_deref(), &ov)?;
            write_run(
                &Invocation::Sweep { config },
                &run.out,
                run.config.as_deref(),
                threads,
            )?;
            eprintln!(
                "wrote results.csv and summary.json to {}",
                run.out.display()
            );
        }
        Command::Losses {
            truth,
            predictions,
            delta,
            grid: g,
            out,
        } => {
            let inv = Invocation::Losses {
                truth: absolute(&truth)?,
                predictions: absolute(&predictions)?,
                delta_deg: delta,
                grid: grid(&g)?,
            };
            emit(inv, out, threads)?;
        }
        Command::Overhead { n_rf, scs, out } => {
            emit(
                Invocation::Overhead {
                    num_rf: n_rf,
                    subcarrier_spacing_hz: scs,
                },
                out,
                threads,
            )?;
        }
        Command::ComputeBeamspace {
            aods,
            grid: g,
            array,
            out,
        } => {
            let (n_x, n_y) = parse_grid(&array).context("bad --array")?;
            let inv = Invocation::Beamspace {
                aods: absolute(&aods)?,
                grid: grid(&g)?,
                array: ArraySpec { n_x, n_y },
            };
            emit(inv, out, threads)?;
        }
        Command::Replay { manifest, out } => {
            let m = replay(&manifest, &out, threads)?;
            eprintln!("replayed {} files into {}", m.outputs.len(), out.display());
        }
    }
    Ok(())
}
