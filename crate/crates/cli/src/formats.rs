//! JSON exchange formats. Angles are degrees on disk and radians in memory.
//!
//! * scenario: `{schema_version, trial, seed, ues: [{ue_id, clusters: [{paths:
//!   [{gain_re, gain_im, delay_s, azimuth_deg, elevation_deg}]}]}]}`
//! * AoD-list: `{clusters: [[{azimuth_deg, elevation_deg}]]}`
//! * beamspace: `{grid: {g_theta, g_phi}, values: [..]}` (row-major over
//!   azimuth, then elevation)
//! * prediction grid: `{grid: {g_theta, g_phi}, probabilities: [..],
//!   features?: [512 floats]}`
//! * estimates: `{schema_version, estimates: [{trial, ue_id, ..}]}` where each
//!   entry carries either an AoD-list (`clusters`) or a `beamspace` plus
//!   `num_paths`.
//!
//! AoD-list, prediction and beamspace files hold either one object or an
//! array of them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use beamspace_core::array::Direction;
use beamspace_core::beamspace::{AngleGrid, AodList, Beamspace};
use beamspace_core::channel::{PathComponent, RayCluster, UeChannel};
use beamspace_core::encoding::{EncodingGrid, FeatureVector, PredictionGrid};
use beamspace_core::evaluation::ProvidedEstimate;
use beamspace_core::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleJson {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl AngleJson {
    pub fn from_direction(d: &Direction) -> Self {
        Self {
            azimuth_deg: d.azimuth_deg(),
            elevation_deg: d.elevation_deg(),
        }
    }

    pub fn to_direction(self) -> Result<Direction> {
        Ok(Direction::from_degrees(
            self.azimuth_deg,
            self.elevation_deg,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AodListJson {
    pub clusters: Vec<Vec<AngleJson>>,
}

impl AodListJson {
    pub fn from_list(a: &AodList) -> Self {
        Self {
            clusters: a
                .clusters()
                .iter()
                .map(|c| c.iter().map(AngleJson::from_direction).collect())
                .collect(),
        }
    }

    pub fn to_list(&self) -> Result<AodList> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                c.iter()
                    .map(|a| a.to_direction())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AodList::new(clusters))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathJson {
    pub gain_re: f64,
    pub gain_im: f64,
    pub delay_s: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterJson {
    pub paths: Vec<PathJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeJson {
    pub ue_id: u32,
    pub clusters: Vec<ClusterJson>,
}

impl UeJson {
    pub fn from_channel(ch: &UeChannel) -> Self {
        Self {
            ue_id: ch.ue_id,
            clusters: ch
                .clusters()
                .iter()
                .map(|c| ClusterJson {
                    paths: c
                        .paths()
                        .iter()
                        .map(|p| PathJson {
                            gain_re: p.gain.re,
                            gain_im: p.gain.im,
                            delay_s: p.delay,
                            azimuth_deg: p.direction.azimuth_deg(),
                            elevation_deg: p.direction.elevation_deg(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_channel(&self) -> Result<UeChannel> {
        let clusters = self
            .clusters
            .iter()
            .map(|c| {
                let paths = c
                    .paths
                    .iter()
                    .map(|p| {
                        Ok(PathComponent {
                            gain: Complex64::new(p.gain_re, p.gain_im),
                            delay: p.delay_s,
                            direction: Direction::from_degrees(p.azimuth_deg, p.elevation_deg)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(RayCluster::new(paths)?)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(UeChannel::new(self.ue_id, clusters)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub trial: usize,
    pub seed: u64,
    pub ues: Vec<UeJson>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridJson {
    pub g_theta: usize,
    pub g_phi: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamspaceJson {
    pub grid: GridJson,
    pub values: Vec<f64>,
}

impl BeamspaceJson {
    pub fn from_beamspace(b: &Beamspace) -> Self {
        let g = b.grid();
        Self {
            grid: GridJson {
                g_theta: g.g_theta,
                g_phi: g.g_phi,
            },
            values: b.values().to_vec(),
        }
    }

    pub fn to_beamspace(&self) -> Result<Beamspace> {
        let grid = AngleGrid::new(self.grid.g_theta, self.grid.g_phi)?;
        Ok(Beamspace::from_values(grid, self.values.clone())?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionJson {
    pub grid: GridJson,
    pub probabilities: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
}

impl PredictionJson {
    pub fn to_prediction(&self) -> Result<PredictionGrid> {
        let grid = EncodingGrid::new(self.grid.g_theta, self.grid.g_phi)?;
        Ok(PredictionGrid::new(grid, self.probabilities.clone())?)
    }

    pub fn to_features(&self) -> Result<Option<FeatureVector>> {
        self.features
            .as_ref()
            .map(|f| FeatureVector::new(f.clone()).map_err(Into::into))
            .transpose()
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("{} does not match the expected schema", path.display()))
}

/// Reads one object or an array of objects.
pub fn read_batch<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    // Parse to a value first so the error names the failing item.
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not valid JSON", path.display()))?;
    let items = match v {
        serde_json::Value::Array(a) => a,
        other => vec![other],
    };
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            serde_json::from_value(item).with_context(|| {
                format!(
                    "{}: item {i} does not match the expected schema",
                    path.display()
                )
            })
        })
        .collect()
}

pub fn read_scenario(path: &Path) -> Result<ScenarioFile> {
    read_json(path)
}

#[derive(Clone, Debug, Deserialize)]
struct EstimateEntry {
    trial: usize,
    ue_id: u32,
    #[serde(flatten)]
    body: EstimateBody,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum EstimateBody {
    Beamspace {
        beamspace: BeamspaceJson,
        num_paths: usize,
    },
    Aods {
        clusters: Vec<Vec<AngleJson>>,
    },
}

#[derive(Clone, Debug, Deserialize)]
struct EstimateFile {
    schema_version: u32,
    estimates: Vec<EstimateEntry>,
}

/// Loads externally predicted AoD-lists or beamspaces keyed by
/// `(trial, ue_id)`. Beamspaces must be on `grid`.
pub fn read_estimates(
    path: &Path,
    grid: &AngleGrid,
) -> Result<BTreeMap<(usize, u32), ProvidedEstimate>> {
    let file: EstimateFile = read_json(path)?;
    if file.schema_version != crate::config::SCHEMA_VERSION {
        bail!(
            "{}: unsupported schema_version {}",
            path.display(),
            file.schema_version
        );
    }
    let mut out = BTreeMap::new();
    for e in file.estimates {
        let est = match e.body {
            EstimateBody::Aods { clusters } => {
                ProvidedEstimate::Aods(AodListJson { clusters }.to_list()?)
            }
            EstimateBody::Beamspace {
                beamspace,
                num_paths,
            } => {
                let b = beamspace.to_beamspace()?;
                if b.grid() != grid {
                    bail!(
                        "{}: beamspace for trial {} UE {} is {}x{}, sweep grid is {}x{}",
                        path.display(),
                        e.trial,
                        e.ue_id,
                        b.grid().g_theta,
                        b.grid().g_phi,
                        grid.g_theta,
                        grid.g_phi
                    );
                }
                ProvidedEstimate::Beamspace {
                    beamspace: b,
                    num_paths,
                }
            }
        };
        if out.insert((e.trial, e.ue_id), est).is_some() {
            bail!(
                "{}: duplicate estimate for trial {} UE {}",
                path.display(),
                e.trial,
                e.ue_id
            );
        }
    }
    Ok(out)
}

/// `"90x45"` -> `(90, 45)`.
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid {s:?} must look like <azimuth bins>x<elevation bins>"))?;
    let a: usize = a
        .trim()
        .parse()
        .with_context(|| format!("bad grid size in {s:?}"))?;
    let b: usize = b
        .trim()
        .parse()
        .with_context(|| format!("bad grid size in {s:?}"))?;
    if a == 0 || b == 0 {
        bail!("grid sizes must be positive, got {s:?}");
    }
    Ok((a, b))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aod_list_round_trip() {
        let list = AodList::new(vec![
            vec![Direction::from_degrees(10.0, 80.0).unwrap()],
            vec![
                Direction::from_degrees(-30.0, 45.0).unwrap(),
                Direction::from_degrees(0.0, 90.0).unwrap(),
            ],
        ]);
        let j = AodListJson::from_list(&list);
        let back = j.to_list().unwrap();
        assert_eq!(back.clusters().len(), 2);
        for (a, b) in list.directions().zip(back.directions()) {
            assert!(a.angle_to(b) < 1e-12);
        }
    }

    #[test]
    fn grid_strings() {
        assert_eq!(parse_grid("90x45").unwrap(), (90, 45));
        assert!(parse_grid("90").is_err());
        assert!(parse_grid("0x4").is_err());
    }

    #[test]
    fn estimate_entries_of_both_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("est.json");
        let values = vec![0.0; 8];
        let doc = serde_json::json!({
            "schema_version": 1,
            "estimates": [
                {"trial": 0, "ue_id": 1, "clusters": [[{"azimuth_deg": 5.0, "elevation_deg": 70.0}]]},
                {"trial": 0, "ue_id": 2, "beamspace": {"grid": {"g_theta": 4, "g_phi": 2}, "values": values}, "num_paths": 3}
            ]
        });
        fs::write(&p, doc.to_string()).unwrap();
        let grid = AngleGrid::new(4, 2).unwrap();
        let m = read_estimates(&p, &grid).unwrap();
        assert!(matches!(m[&(0, 1)], ProvidedEstimate::Aods(_)));
        assert!(matches!(
            m[&(0, 2)],
            ProvidedEstimate::Beamspace { num_paths: 3, .. }
        ));
        assert!(read_estimates(&p, &AngleGrid::new(8, 2).unwrap()).is_err());
    }
}
