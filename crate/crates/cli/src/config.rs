//! Run configuration: a versioned JSON document, named presets and the
//! conversion to [`SweepConfig`].
//!
//! A config file is merged key-by-key over a preset (its own `"preset"` key,
//! else `--preset`, else `u4-desk`), then command-line overrides are applied.
//! The fully resolved document is what manifests record.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use beamspace_core::array::ArrayConfig;
use beamspace_core::beamspace::{AngleGrid, TruncationMode};
use beamspace_core::channel::{AngleSector, IntRange, OfdmConfig, ScenarioConfig};
use beamspace_core::evaluation::{
    thermal_noise_dbm, Estimator, EstimatorErrorModel, Strategy, SweepConfig,
};
use beamspace_core::precoding::{EstimationNoise, ResidualRule};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::formats;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PRESET: &str = "u4-desk";
pub const PRESETS: [&str; 5] = ["u2-paper", "u4-paper", "u2-desk", "u4-desk", "fig6-desk"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: usize,
    pub users_per_cluster: usize,
    pub array: ArraySpec,
    pub grid: GridSpec,
    pub ofdm: OfdmSpec,
    pub scenario: ScenarioSpec,
    pub eirp_dbm: Vec<f64>,
    pub noise_figure_db: f64,
    /// Overrides the thermal noise floor when set.
    pub noise_power_dbm: Option<f64>,
    pub strategies: Vec<String>,
    pub truncation_budget: usize,
    pub truncation_mode: TruncationSpec,
    pub estimation_noise: NoiseSpec,
    pub residual_rule: ResidualSpec,
    pub codebook_oversampling: usize,
    /// `ground_truth`, `perturbed:<std_deg>` or `file:<path>`.
    pub estimator: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n_x: usize,
    pub n_y: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub g_theta: usize,
    pub g_phi: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmSpec {
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub num_taps: usize,
    pub pulse_rolloff: f64,
    pub first_tap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub num_ues: usize,
    pub cluster_count: [usize; 2],
    pub paths_per_cluster: [usize; 2],
    pub azimuth_range_deg: [f64; 2],
    pub elevation_range_deg: [f64; 2],
    pub angle_spread_deg: f64,
    /// Delays spread over this many sample periods after the first tap.
    pub delay_spread_taps: f64,
    pub shared_cluster_probability: f64,
    pub cluster_power_exponent: f64,
    pub channel_gain_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationSpec {
    Global,
    PerCluster,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    Noiseless,
    SnrDb(f64),
    AboveLinkDb(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualSpec {
    Estimated,
    Residual,
}

/// Parsed form of the `estimator` string.
#[derive(Clone, Debug, PartialEq)]
pub enum EstimatorSpec {
    GroundTruth,
    Perturbed { std_deg: f64 },
    File(PathBuf),
}

impl std::str::FromStr for EstimatorSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ground_truth" {
            return Ok(EstimatorSpec::GroundTruth);
        }
        if let Some(v) = s.strip_prefix("perturbed:") {
            let std_deg: f64 = v
                .parse()
                .with_context(|| format!("bad angular std in {s:?}"))?;
            if !std_deg.is_finite() || std_deg < 0.0 {
                bail!("angular std must be a nonnegative number, got {v}");
            }
            return Ok(EstimatorSpec::Perturbed { std_deg });
        }
        if let Some(p) = s.strip_prefix("file:") {
            if p.is_empty() {
                bail!("file: estimator needs a path");
            }
            return Ok(EstimatorSpec::File(PathBuf::from(p)));
        }
        bail!("unknown estimator {s:?} (expected ground_truth, perturbed:<std_deg> or file:<path>)")
    }
}

fn common_scenario(num_ues: usize, delay_spread_taps: f64) -> Value {
    json!({
        "num_ues": num_ues,
        "cluster_count": [2, 4],
        "paths_per_cluster": [4, 8],
        "azimuth_range_deg": [-30.0, 30.0],
        "elevation_range_deg": [60.0, 90.0],
        "angle_spread_deg": 5.0,
        "delay_spread_taps": delay_spread_taps,
        "shared_cluster_probability": 0.8,
        "cluster_power_exponent": 1.0,
        "channel_gain_db": -90.0
    })
}

/// The fully specified preset document.
pub fn preset(name: &str) -> Result<Value> {
    let eirp: Vec<f64> = (0..6).map(|i| 12.0 + 6.0 * i as f64).collect();
    let base = |u: usize,
                array: [usize; 2],
                grid: [usize; 2],
                ofdm: Value,
                scenario: Value,
                trials: usize| {
        json!({
            "schema_version": SCHEMA_VERSION,
            "seed": 2024,
            "trials": trials,
            "users_per_cluster": u,
            "array": {"n_x": array[0], "n_y": array[1]},
            "grid": {"g_theta": grid[0], "g_phi": grid[1]},
            "ofdm": ofdm,
            "scenario": scenario,
            "eirp_dbm": eirp,
            "noise_figure_db": 7.0,
            "noise_power_dbm": null,
            "strategies": ["full_csi", "ground_truth_beamspace", "algorithm1", "beam_prediction"],
            "truncation_budget": 25,
            "truncation_mode": "global",
            "estimation_noise": {"above_link_db": 10.0},
            "residual_rule": "estimated",
            "codebook_oversampling": 1,
            "estimator": "perturbed:6.1"
        })
    };
    let paper_ofdm = json!({
        "num_subcarriers": 792, "subcarrier_spacing_hz": 120e3,
        "num_taps": 64, "pulse_rolloff": 0.25, "first_tap": 1
    });
    let desk_ofdm = json!({
        "num_subcarriers": 64, "subcarrier_spacing_hz": 120e3,
        "num_taps": 16, "pulse_rolloff": 0.25, "first_tap": 1
    });
    Ok(match name {
        "u2-paper" => base(
            2,
            [16, 8],
            [64, 32],
            paper_ofdm,
            common_scenario(10, 32.0),
            20,
        ),
        "u4-paper" => base(
            4,
            [16, 16],
            [64, 64],
            paper_ofdm,
            common_scenario(10, 32.0),
            20,
        ),
        "u2-desk" => base(2, [8, 4], [64, 32], desk_ofdm, common_scenario(10, 8.0), 50),
        "u4-desk" => base(4, [8, 4], [64, 64], desk_ofdm, common_scenario(10, 8.0), 50),
        "fig6-desk" => base(
            4,
            [8, 4],
            [64, 64],
            desk_ofdm,
            common_scenario(10, 8.0),
            200,
        ),
        other => bail!("unknown preset {other:?} (known: {})", PRESETS.join(", ")),
    })
}

/// Keys whose object value names an enum variant; they replace, never merge.
const VARIANT_KEYS: [&str; 1] = ["estimation_noise"];

/// Recursively overlays `top` on `base`; objects merge, everything else
/// replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) if VARIANT_KEYS.contains(&k.as_str()) => *slot = v,
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Command-line overrides applied after merging.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub strategies: Option<Vec<String>>,
    pub estimator: Option<String>,
}

/// Reads and resolves a config. Relative `file:` estimator paths are taken
/// relative to the config file and made absolute so the resolved document
/// can be replayed from anywhere.
pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<RunConfig> {
    let (user, base_dir) = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            let v: Value = serde_json::from_str(&text)
                .with_context(|| format!("config {} is not valid JSON", p.display()))?;
            if !v.is_object() {
                bail!("config {} must be a JSON object", p.display());
            }
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (v, dir)
        }
        None => (json!({}), PathBuf::new()),
    };
    resolve(user, &base_dir, ov)
}

pub fn resolve(mut user: Value, base_dir: &Path, ov: &Overrides) -> Result<RunConfig> {
    let from_file = match user.as_object_mut().and_then(|m| m.remove("preset")) {
        Some(Value::String(s)) => Some(s),
        Some(other) => bail!("\"preset\" must be a string, got {other}"),
        None => None,
    };
    let name = ov
        .preset
        .clone()
        .or(from_file)
        .unwrap_or_else(|| DEFAULT_PRESET.into());
    let mut doc = preset(&name)?;
    if let Some(v) = user.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            bail!("unsupported schema_version {v} (this build reads {SCHEMA_VERSION})");
        }
    }
    merge(&mut doc, user);
    let mut cfg: RunConfig =
        serde_json::from_value(doc).context("config does not match the schema")?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(t) = ov.trials {
        cfg.trials = t;
    }
    if let Some(s) = &ov.strategies {
        cfg.strategies = s.clone();
    }
    if let Some(e) = &ov.estimator {
        cfg.estimator = e.clone();
    }
    if let EstimatorSpec::File(p) = cfg.estimator.parse()? {
        let p = if p.is_relative() && ov.estimator.is_none() {
            base_dir.join(p)
        } else {
            p
        };
        let abs = std::path::absolute(&p)
            .with_context(|| format!("cannot resolve estimator path {}", p.display()))?;
        cfg.estimator = format!("file:{}", abs.display());
    }
    cfg.sweep_config()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn ofdm(&self) -> OfdmConfig {
        let o = &self.ofdm;
        OfdmConfig {
            pulse_rolloff: o.pulse_rolloff,
            first_tap: o.first_tap,
            ..OfdmConfig::new(o.num_subcarriers, o.subcarrier_spacing_hz, o.num_taps)
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let s = &self.scenario;
        let ofdm = self.ofdm();
        for (name, r) in [
            ("cluster_count", s.cluster_count),
            ("paths_per_cluster", s.paths_per_cluster),
        ] {
            if r[0] > r[1] {
                bail!("scenario.{name}: range [{}, {}] is empty", r[0], r[1]);
            }
        }
        Ok(ScenarioConfig {
            num_ues: s.num_ues,
            cluster_count: IntRange::new(s.cluster_count[0], s.cluster_count[1]),
            paths_per_cluster: IntRange::new(s.paths_per_cluster[0], s.paths_per_cluster[1]),
            centroid_sector: AngleSector {
                azimuth_min: s.azimuth_range_deg[0].to_radians(),
                azimuth_max: s.azimuth_range_deg[1].to_radians(),
                elevation_min: s.elevation_range_deg[0].to_radians(),
                elevation_max: s.elevation_range_deg[1].to_radians(),
            },
            angle_spread: s.angle_spread_deg.to_radians(),
            delay_offset: ofdm.first_tap as f64 * ofdm.sample_period,
            delay_spread: s.delay_spread_taps * ofdm.sample_period,
            shared_cluster_probability: s.shared_cluster_probability,
            cluster_power_exponent: s.cluster_power_exponent,
            channel_gain_db: s.channel_gain_db,
            rng_seed: 0,
        })
    }

    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        self.strategies
            .iter()
            .map(|s| s.parse::<Strategy>().map_err(|e| anyhow::anyhow!("{e}")))
            .collect()
    }

    /// Converts and validates. `file:` estimators are read from disk.
    pub fn sweep_config(&self) -> Result<SweepConfig> {
        let ofdm = self.ofdm();
        let grid = AngleGrid::new(self.grid.g_theta, self.grid.g_phi)?;
        let estimator = match self.estimator.parse::<EstimatorSpec>()? {
            EstimatorSpec::GroundTruth => Estimator::GroundTruth,
            EstimatorSpec::Perturbed { std_deg } => Estimator::Perturbed(
                EstimatorErrorModel::angular(std_deg.to_radians(), self.seed),
            ),
            EstimatorSpec::File(p) => Estimator::Provided(formats::read_estimates(&p, &grid)?),
        };
        let cfg = SweepConfig {
            scenario: self.scenario()?,
            ofdm,
            array: ArrayConfig::new(self.array.n_x, self.array.n_y)?,
            grid,
            users_per_cluster: self.users_per_cluster,
            eirp_dbm: self.eirp_dbm.clone(),
            noise_power_dbm: self
                .noise_power_dbm
                .unwrap_or_else(|| thermal_noise_dbm(&ofdm, self.noise_figure_db)),
            strategies: self.strategies()?,
            trials: self.trials,
            truncation_budget: self.truncation_budget,
            truncation_mode: match self.truncation_mode {
                TruncationSpec::Global => TruncationMode::Global,
                TruncationSpec::PerCluster => TruncationMode::PerCluster,
            },
            estimation_noise: match self.estimation_noise {
                NoiseSpec::Noiseless => EstimationNoise::Noiseless,
                NoiseSpec::SnrDb(d) => EstimationNoise::SnrDb(d),
                NoiseSpec::AboveLinkDb(d) => EstimationNoise::AboveLinkDb(d),
            },
            residual_rule: match self.residual_rule {
                ResidualSpec::Estimated => ResidualRule::Estimated,
                ResidualSpec::Residual => ResidualRule::Residual,
            },
            codebook_oversampling: self.codebook_oversampling,
            estimator,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            let ov = Overrides {
                preset: Some(name.into()),
                ..Default::default()
            };
            let cfg = resolve(json!({}), Path::new(""), &ov).unwrap();
            let sweep = cfg.sweep_config().unwrap();
            assert_eq!(sweep.strategies.len(), 4, "{name}");
        }
    }

    #[test]
    fn paper_shapes() {
        let get =
            |n: &str| resolve(json!({"preset": n}), Path::new(""), &Overrides::default()).unwrap();
        let u2 = get("u2-paper");
        assert_eq!(
            (u2.array.n_x, u2.array.n_y, u2.users_per_cluster),
            (16, 8, 2)
        );
        assert_eq!((u2.grid.g_theta, u2.grid.g_phi), (64, 32));
        let u4 = get("u4-paper");
        assert_eq!(
            (u4.array.n_x, u4.array.n_y, u4.users_per_cluster),
            (16, 16, 4)
        );
        assert_eq!((u4.grid.g_theta, u4.grid.g_phi), (64, 64));
        for c in [u2, u4] {
            assert_eq!(c.ofdm.num_subcarriers, 792);
            assert_eq!(c.ofdm.subcarrier_spacing_hz, 120e3);
            assert_eq!(c.truncation_budget, 25);
        }
    }

    #[test]
    fn merge_is_deep() {
        let cfg = resolve(
            json!({"scenario": {"num_ues": 6}, "eirp_dbm": [30.0]}),
            Path::new(""),
            &Overrides {
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.scenario.num_ues, 6);
        assert_eq!(cfg.scenario.cluster_count, [2, 4]);
        assert_eq!(cfg.eirp_dbm, vec![30.0]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn noise_variant_replaces_preset_variant() {
        let cfg = resolve(
            json!({"estimation_noise": {"snr_db": 20.0}}),
            Path::new(""),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(cfg.estimation_noise, NoiseSpec::SnrDb(20.0));
    }

    #[test]
    fn schema_violations_are_reported() {
        let r = |v: Value| resolve(v, Path::new(""), &Overrides::default());
        assert!(r(json!({"schema_version": 2})).is_err());
        assert!(r(json!({"bogus": 1})).is_err());
        assert!(r(json!({"scenario": {"cluster_count": [4, 2]}})).is_err());
        assert!(r(json!({"scenario": {"shared_cluster_probability": 1.5}})).is_err());
        assert!(r(json!({"strategies": ["nope"]})).is_err());
        assert!(r(json!({"estimator": "perturbed:x"})).is_err());
    }

    #[test]
    fn estimator_strings() {
        assert_eq!(
            "ground_truth".parse::<EstimatorSpec>().unwrap(),
            EstimatorSpec::GroundTruth
        );
        assert_eq!(
            "perturbed:6.1".parse::<EstimatorSpec>().unwrap(),
            EstimatorSpec::Perturbed { std_deg: 6.1 }
        );
        assert_eq!(
            "file:a/b.json".parse::<EstimatorSpec>().unwrap(),
            EstimatorSpec::File("a/b.json".into())
        );
        assert!("file:".parse::<EstimatorSpec>().is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = resolve(json!({}), Path::new(""), &Overrides::default()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = resolve(
            serde_json::from_str(&text).unwrap(),
            Path::new(""),
            &Overrides::default(),
        )
        .unwrap();
        assert_eq!(cfg, back);
    }
}
