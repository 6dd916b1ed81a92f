//! Command implementations. Each command renders its outputs in memory as
//! `(file name, bytes)` pairs; [`write_run`] puts them on disk next to a
//! [`RunManifest`] from which [`replay`] can regenerate them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, ensure, Context, Result};
use beamspace_core::array::ArrayConfig;
use beamspace_core::beamspace::{compute_beamspace, AngleGrid};
use beamspace_core::channel::generate_scenario;
use beamspace_core::channel::ScenarioConfig;
use beamspace_core::encoding::{
    bce_loss, decode_predictions, hard_encode, mad_batch, mae_cosines_batch, soft_encode,
    sscl_loss, EncodingGrid,
};
use beamspace_core::evaluation::{overhead_report, run_trial, SweepReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ArraySpec, RunConfig, SCHEMA_VERSION};
use crate::formats::{
    read_batch, to_json_text, AodListJson, BeamspaceJson, GridJson, PredictionJson, ScenarioFile,
    UeJson,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to rerun a command. Input file paths are absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Invocation {
    Generate {
        config: RunConfig,
    },
    Sweep {
        config: RunConfig,
    },
    Losses {
        truth: PathBuf,
        predictions: PathBuf,
        delta_deg: f64,
        grid: GridJson,
    },
    Overhead {
        num_rf: usize,
        subcarrier_spacing_hz: f64,
    },
    Beamspace {
        aods: PathBuf,
        grid: GridJson,
        array: ArraySpec,
    },
}

impl Invocation {
    fn seed(&self) -> Option<u64> {
        match self {
            Invocation::Generate { config } | Invocation::Sweep { config } => Some(config.seed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub created_unix_s: u64,
    /// Config file as given on the command line, if any. The resolved
    /// config is embedded in `invocation`.
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub outputs: Vec<String>,
    pub invocation: Invocation,
}

pub type Files = Vec<(String, Vec<u8>)>;

/// Renders the outputs of `inv`. `threads` only affects sweep scheduling.
pub fn execute(inv: &Invocation, threads: Option<usize>) -> Result<Files> {
    match inv {
        Invocation::Generate { config } => generate(config),
        Invocation::Sweep { config } => sweep(config, threads),
        Invocation::Losses {
            truth,
            predictions,
            delta_deg,
            grid,
        } => losses(truth, predictions, *delta_deg, *grid),
        Invocation::Overhead {
            num_rf,
            subcarrier_spacing_hz,
        } => {
            let r = overhead_report(*num_rf, *subcarrier_spacing_hz)?;
            let doc = serde_json::json!({
                "num_rf": num_rf,
                "subcarrier_spacing_hz": subcarrier_spacing_hz,
                "ssb_sweep_ms": r.ssb_ms,
                "preamble_ms": r.preamble_ms,
                "reduction_factor": r.reduction_factor,
            });
            Ok(vec![(
                "overhead.json".into(),
                to_json_text(&doc)?.into_bytes(),
            )])
        }
        Invocation::Beamspace { aods, grid, array } => {
            let lists: Vec<AodListJson> = read_batch(aods)?;
            let g = AngleGrid::new(grid.g_theta, grid.g_phi)?;
            let arr = ArrayConfig::new(array.n_x, array.n_y)?;
            let out = lists
                .iter()
                .map(|l| {
                    Ok(BeamspaceJson::from_beamspace(&compute_beamspace(
                        &l.to_list()?,
                        &g,
                        &arr,
                    )))
                })
                .collect::<Result<Vec<_>>>()?;
            let text = if out.len() == 1 {
                to_json_text(&out[0])?
            } else {
                to_json_text(&out)?
            };
            Ok(vec![("beamspace.json".into(), text.into_bytes())])
        }
    }
}

fn config_file(cfg: &RunConfig) -> Result<(String, Vec<u8>)> {
    Ok(("config.json".into(), to_json_text(cfg)?.into_bytes()))
}

fn generate(cfg: &RunConfig) -> Result<Files> {
    let sweep = cfg.sweep_config()?;
    let mut files = vec![config_file(cfg)?];
    for t in 0..sweep.trials {
        let seed = sweep.trial_seed(t);
        let ues = generate_scenario(&ScenarioConfig {
            rng_seed: seed,
            ..sweep.scenario
        })?;
        let doc = ScenarioFile {
            schema_version: SCHEMA_VERSION,
            trial: t,
            seed,
            ues: ues.iter().map(UeJson::from_channel).collect(),
        };
        files.push((
            format!("scenario_{t:05}.json"),
            to_json_text(&doc)?.into_bytes(),
        ));
    }
    Ok(files)
}

pub const RESULTS_HEADER: [&str; 7] = [
    "strategy",
    "eirp_dbm",
    "trial",
    "cluster_id",
    "ue_id",
    "se_bps_hz",
    "sum_se_bps_hz",
];

#[derive(Serialize)]
struct SummaryRowJson {
    strategy: &'static str,
    eirp_dbm: f64,
    median_sum_se_bps_hz: f64,
    p25_sum_se_bps_hz: f64,
    p75_sum_se_bps_hz: f64,
    samples: usize,
}

#[derive(Serialize)]
struct SummaryJson {
    schema_version: u32,
    trials: usize,
    noise_power_dbm: f64,
    rows: Vec<SummaryRowJson>,
}

/// Runs all trials (in parallel when a pool is available) and reduces them
/// in trial order.
pub fn run_report(cfg: &RunConfig, threads: Option<usize>) -> Result<(SweepReport, f64)> {
    let sweep = cfg.sweep_config()?;
    let work = || {
        (0..sweep.trials)
            .into_par_iter()
            .map(|t| run_trial(&sweep, t))
            .collect::<std::result::Result<Vec<_>, _>>()
    };
    let per_trial = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("cannot start worker threads")?
            .install(work)?,
        None => work()?,
    };
    Ok((
        SweepReport::from_trials(&sweep, per_trial),
        sweep.noise_power_dbm,
    ))
}

fn sweep(cfg: &RunConfig, threads: Option<usize>) -> Result<Files> {
    let (report, noise) = run_report(cfg, threads)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    for r in &report.records {
        let cluster = r
            .cluster
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join("-");
        w.write_record([
            r.strategy.name().to_string(),
            r.eirp_dbm.to_string(),
            r.trial.to_string(),
            cluster,
            r.ue_id.to_string(),
            r.se.to_string(),
            r.sum_se.to_string(),
        ])?;
    }
    let csv_bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    let summary = SummaryJson {
        schema_version: SCHEMA_VERSION,
        trials: report.trials,
        noise_power_dbm: noise,
        rows: report
            .rows
            .iter()
            .map(|r| SummaryRowJson {
                strategy: r.strategy.name(),
                eirp_dbm: r.eirp_dbm,
                median_sum_se_bps_hz: r.median,
                p25_sum_se_bps_hz: r.p25,
                p75_sum_se_bps_hz: r.p75,
                samples: r.samples,
            })
            .collect(),
    };
    Ok(vec![
        config_file(cfg)?,
        ("results.csv".into(), csv_bytes),
        ("summary.json".into(), to_json_text(&summary)?.into_bytes()),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub bce: f64,
    /// Present when every prediction carries a feature vector.
    pub sscl: Option<f64>,
    /// Over samples whose decoded prediction and truth are both nonempty.
    pub mad_deg: Option<f64>,
    pub mae_cos: Option<f64>,
    pub samples: usize,
    pub scored_samples: usize,
}

pub fn compute_losses(
    truth: &[AodListJson],
    preds: &[PredictionJson],
    delta_deg: f64,
    grid: GridJson,
) -> Result<LossReport> {
    ensure!(!truth.is_empty(), "no samples");
    ensure!(
        truth.len() == preds.len(),
        "{} truth AoD-lists but {} predictions",
        truth.len(),
        preds.len()
    );
    let enc = EncodingGrid::new(grid.g_theta, grid.g_phi)?;
    let truth = truth
        .iter()
        .map(AodListJson::to_list)
        .collect::<Result<Vec<_>>>()?;
    let mut pgrids = Vec::with_capacity(preds.len());
    for (i, p) in preds.iter().enumerate() {
        if p.grid != grid {
            bail!(
                "prediction {i} is on a {}x{} grid, expected {}x{}",
                p.grid.g_theta,
                p.grid.g_phi,
                grid.g_theta,
                grid.g_phi
            );
        }
        pgrids.push(p.to_prediction()?);
    }
    let hard: Vec<_> = truth.iter().map(|t| hard_encode(t, &enc)).collect();
    let bce = bce_loss(&pgrids, &hard)?;

    let features = preds
        .iter()
        .map(PredictionJson::to_features)
        .collect::<Result<Vec<_>>>()?;
    let with = features.iter().filter(|f| f.is_some()).count();
    let sscl = if with == 0 {
        None
    } else if with == features.len() {
        let soft = truth
            .iter()
            .map(|t| soft_encode(t, &enc, delta_deg.to_radians()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let feats: Vec<_> = features.into_iter().flatten().collect();
        Some(sscl_loss(&feats, &soft)?)
    } else {
        bail!(
            "{with} of {} predictions carry features; need all or none",
            features.len()
        );
    };

    let pairs: Vec<_> = pgrids
        .iter()
        .zip(&truth)
        .map(|(p, t)| (decode_predictions(p), t.clone()))
        .filter(|(p, t)| !p.is_empty() && !t.is_empty())
        .collect();
    let (mad_deg, mae_cos) = if pairs.is_empty() {
        (None, None)
    } else {
        (Some(mad_batch(&pairs)?), Some(mae_cosines_batch(&pairs)?))
    };
    Ok(LossReport {
        bce,
        sscl,
        mad_deg,
        mae_cos,
        samples: truth.len(),
        scored_samples: pairs.len(),
    })
}

fn losses(truth: &Path, predictions: &Path, delta_deg: f64, grid: GridJson) -> Result<Files> {
    let t: Vec<AodListJson> = read_batch(truth)?;
    let p: Vec<PredictionJson> = read_batch(predictions)?;
    let report = compute_losses(&t, &p, delta_deg, grid)?;
    Ok(vec![(
        "losses.json".into(),
        to_json_text(&report)?.into_bytes(),
    )])
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Executes `inv` and writes its outputs plus a manifest into `out`.
pub fn write_run(
    inv: &Invocation,
    out: &Path,
    config_path: Option<&Path>,
    threads: Option<usize>,
) -> Result<RunManifest> {
    let files = execute(inv, threads)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    for (name, bytes) in &files {
        let p = out.join(name);
        fs::write(&p, bytes).with_context(|| format!("cannot write {}", p.display()))?;
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix_s: now_unix(),
        config_path: config_path.map(Path::to_path_buf),
        seed: inv.seed(),
        output_dir: std::path::absolute(out)?,
        outputs: files.into_iter().map(|(n, _)| n).collect(),
        invocation: inv.clone(),
    };
    let p = out.join(MANIFEST_FILE);
    fs::write(&p, to_json_text(&manifest)?)
        .with_context(|| format!("cannot write {}", p.display()))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} is not a valid manifest", path.display()))
}

/// Reruns the invocation recorded in a manifest into `out`.
pub fn replay(manifest: &Path, out: &Path, threads: Option<usize>) -> Result<RunManifest> {
    let m = read_manifest(manifest)?;
    write_run(&m.invocation, out, m.config_path.as_deref(), threads)
}
