//! Clustered geometric wideband channel and its OFDM frequency response.
//!
//! ```text
//! H[k] = sum_{d} sum_{c} sum_{l} alpha_{c,l} p(d T_s - tau_{c,l}) A(theta_{c,l}, phi_{c,l}) exp(-j 2 pi d k / K)
//! ```
//!
//! with `d` running over `D` taps starting at [`OfdmConfig::first_tap`]
//! (default 1). Subcarrier `k` in `{-floor((K-1)/2), ..., ceil((K-1)/2)}` is
//! stored at index `k mod K`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{array_response, ArrayConfig, Direction};
use crate::linalg::CMatrix;
#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::math::{db_to_linear, sinc, PI, TAU};
use crate::{Complex64, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathComponent {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RayCluster {
    paths: Vec<PathComponent>,
}

impl RayCluster {
    pub fn new(paths: Vec<PathComponent>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::EmptyInput("ray cluster without paths"));
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[PathComponent] {
        &self.paths
    }
}

/// The channel of one UE in one time slot.
#[derive(Clone, Debug, PartialEq)]
pub struct UeChannel {
    pub ue_id: u32,
    clusters: Vec<RayCluster>,
}

impl UeChannel {
    pub fn new(ue_id: u32, clusters: Vec<RayCluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::EmptyInput("UE channel without clusters"));
        }
        Ok(Self { ue_id, clusters })
    }

    pub fn clusters(&self) -> &[RayCluster] {
        &self.clusters
    }

    pub fn num_paths(&self) -> usize {
        self.clusters.iter().map(|c| c.paths.len()).sum()
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathComponent> {
        self.clusters.iter().flat_map(|c| c.paths.iter())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfdmConfig {
    /// `K`.
    pub num_subcarriers: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// `D`.
    pub num_taps: usize,
    /// `T_s`, seconds.
    pub sample_period: f64,
    /// Raised-cosine roll-off in `[0, 1]`.
    pub pulse_rolloff: f64,
    /// Index of the first tap of the `d`-sum.
    pub first_tap: usize,
}

impl OfdmConfig {
    /// `K` subcarriers at the given spacing, `T_s = 1 / (K * spacing)`,
    /// roll-off 0.25 and taps starting at 1.
    pub fn new(num_subcarriers: usize, subcarrier_spacing: f64, num_taps: usize) -> Self {
        Self {
            num_subcarriers,
            subcarrier_spacing,
            num_taps,
            sample_period: 1.0 / (num_subcarriers as f64 * subcarrier_spacing),
            pulse_rolloff: 0.25,
            first_tap: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_subcarriers == 0 {
            return bad("num_subcarriers must be >= 1");
        }
        if self.num_taps == 0 {
            return bad("num_taps must be >= 1");
        }
        if !(self.sample_period > 0.0) || !self.sample_period.is_finite() {
            return bad("sample_period must be positive");
        }
        if !(self.subcarrier_spacing > 0.0) || !self.subcarrier_spacing.is_finite() {
            return bad("subcarrier_spacing must be positive");
        }
        if !(0.0..=1.0).contains(&self.pulse_rolloff) {
            return bad("pulse_rolloff must lie in [0, 1]");
        }
        Ok(())
    }

    /// Upper end of the admissible delay range, `D * T_s`.
    pub fn tap_window(&self) -> f64 {
        self.num_taps as f64 * self.sample_period
    }

    /// Signed subcarrier index of storage slot `s`.
    pub fn subcarrier_index(&self, s: usize) -> i64 {
        let k = self.num_subcarriers as i64;
        let hi = k / 2; // ceil((K-1)/2)
        let s = s as i64;
        if s <= hi {
            s
        } else {
            s - k
        }
    }

    /// Storage slot of signed subcarrier `k`.
    pub fn storage_index(&self, k: i64) -> usize {
        k.rem_euclid(self.num_subcarriers as i64) as usize
    }
}

/// Raised-cosine pulse with symbol period `T_s`: `p(0) = 1` and
/// `p(m T_s) = 0` for nonzero integers `m`.
pub fn pulse(t: f64, ofdm: &OfdmConfig) -> f64 {
    let x = t / ofdm.sample_period;
    let beta = ofdm.pulse_rolloff;
    let q = 2.0 * beta * x;
    let denom = 1.0 - q * q;
    if beta > 0.0 && denom.abs() < 1e-10 {
        // Removable singularity at |t| = T_s / (2 beta).
        return PI / 4.0 * sinc(1.0 / (2.0 * beta));
    }
    sinc(x) * (PI * beta * x).cos() / denom
}

/// Per-subcarrier channel matrices `H[k]`, each `n_y x n_x`, in storage order.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyResponse {
    per_subcarrier: Vec<CMatrix>,
}

impl FrequencyResponse {
    pub fn from_matrices(per_subcarrier: Vec<CMatrix>) -> Result<Self> {
        if per_subcarrier.is_empty() {
            return Err(Error::EmptyInput("frequency response without subcarriers"));
        }
        let shape = (per_subcarrier[0].rows(), per_subcarrier[0].cols());
        if per_subcarrier.iter().any(|m| (m.rows(), m.cols()) != shape) {
            return Err(Error::ShapeMismatch(
                "subcarrier matrices differ in shape".into(),
            ));
        }
        Ok(Self { per_subcarrier })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn matrix(&self, k: usize) -> &CMatrix {
        &self.per_subcarrier[k]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.per_subcarrier
    }

    /// `h[k] = vec(H[k])`, row-major.
    pub fn vectorized(&self, k: usize) -> &[Complex64] {
        self.per_subcarrier[k].as_slice()
    }

    /// Number of antenna elements.
    pub fn num_antennas(&self) -> usize {
        self.per_subcarrier[0].as_slice().len()
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let per_subcarrier = self
            .per_subcarrier
            .iter()
            .map(|m| {
                let data = m.as_slice().iter().map(|&v| v * factor).collect();
                CMatrix::from_row_major(m.rows(), m.cols(), data).expect("same shape")
            })
            .collect();
        Self { per_subcarrier }
    }
}

pub fn frequency_response(
    ch: &UeChannel,
    ofdm: &OfdmConfig,
    arr: &ArrayConfig,
) -> Result<FrequencyResponse> {
    ofdm.validate()?;
    arr.validate()?;
    let window = ofdm.tap_window();
    for p in ch.paths() {
        if !(p.delay >= 0.0 && p.delay < window) {
            return Err(Error::DelayOutsideTapWindow {
                delay: p.delay,
                window,
            });
        }
    }
    let k_total = ofdm.num_subcarriers;
    let taps: Vec<usize> = (ofdm.first_tap..ofdm.first_tap + ofdm.num_taps).collect();
    let mut h = alloc::vec![CMatrix::zeros(arr.n_y, arr.n_x); k_total];
    for p in ch.paths() {
        let resp = array_response(&p.direction, arr);
        let weights: Vec<f64> = taps
            .iter()
            .map(|&d| pulse(d as f64 * ofdm.sample_period - p.delay, ofdm))
            .collect();
        for (s, hk) in h.iter_mut().enumerate() {
            let k = ofdm.subcarrier_index(s) as f64;
            let g: Complex64 = taps
                .iter()
                .zip(&weights)
                .map(|(&d, &w)| Complex64::from_polar(w, -TAU * d as f64 * k / k_total as f64))
                .sum();
            hk.add_scaled(p.gain * g, resp.matrix());
        }
    }
    FrequencyResponse::from_matrices(h)
}

/// Closed integer interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

/// Region that cluster centroids are drawn from, radians. Azimuth is
/// uniform on `[azimuth_min, azimuth_max)`; elevation is drawn so that
/// `cos(phi)` is uniform, which makes the full range `[0, pi/2]` uniform over
/// the upper hemisphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleSector {
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for AngleSector {
    fn default() -> Self {
        Self {
            azimuth_min: -PI,
            azimuth_max: PI,
            elevation_min: 0.0,
            elevation_max: PI / 2.0,
        }
    }
}

impl AngleSector {
    fn validate(&self) -> Result<()> {
        let ok = self.azimuth_min < self.azimuth_max
            && self.azimuth_max - self.azimuth_min <= TAU
            && self.azimuth_min.is_finite()
            && self.azimuth_max.is_finite()
            && 0.0 <= self.elevation_min
            && self.elevation_min <= self.elevation_max
            && self.elevation_max <= PI / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "centroid sector is empty or leaves the upper hemisphere".into(),
            ))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> (f64, f64) {
        let az = rng.random_range(self.azimuth_min..self.azimuth_max);
        let (c_lo, c_hi) = (self.elevation_max.cos(), self.elevation_min.cos());
        let el = if c_hi > c_lo {
            rng.random_range(c_lo..=c_hi).acos()
        } else {
            self.elevation_min
        };
        (az, el)
    }
}

/// Synthetic scene description. Angles are radians, times seconds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub num_ues: usize,
    pub cluster_count: IntRange,
    pub paths_per_cluster: IntRange,
    pub centroid_sector: AngleSector,
    /// Full width of the per-path offset around a cluster centroid, applied
    /// independently to azimuth and elevation.
    pub angle_spread: f64,
    /// Smallest path delay; set to `first_tap * T_s` so that energy lands on
    /// the first tap.
    pub delay_offset: f64,
    /// Path delays are `delay_offset + U[0, delay_spread]`.
    pub delay_spread: f64,
    /// Probability that a cluster of a UE reuses the path directions of a
    /// cluster of an earlier UE.
    pub shared_cluster_probability: f64,
    /// Cluster `c` (0-based) carries power proportional to `(c + 1)^-exponent`.
    pub cluster_power_exponent: f64,
    /// Total channel power `sum |alpha|^2` in dB.
    pub channel_gain_db: f64,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_ues == 0 {
            return bad("num_ues must be >= 1");
        }
        if self.cluster_count.min == 0 || self.cluster_count.min > self.cluster_count.max {
            return bad("cluster_count range must be nonempty and start at >= 1");
        }
        if self.paths_per_cluster.min == 0
            || self.paths_per_cluster.min > self.paths_per_cluster.max
        {
            return bad("paths_per_cluster range must be nonempty and start at >= 1");
        }
        self.centroid_sector.validate()?;
        if !(0.0..=PI).contains(&self.angle_spread) {
            return bad("angle_spread must lie in [0, pi]");
        }
        if !(self.delay_offset >= 0.0) || !(self.delay_spread >= 0.0) {
            return bad("delays must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.shared_cluster_probability) {
            return bad("shared_cluster_probability must lie in [0, 1]");
        }
        if !self.cluster_power_exponent.is_finite() || !self.channel_gain_db.is_finite() {
            return bad("power parameters must be finite");
        }
        Ok(())
    }

    /// Checks that every generated delay fits the tap window of `ofdm`.
    pub fn check_tap_window(&self, ofdm: &OfdmConfig) -> Result<()> {
        let worst = self.delay_offset + self.delay_spread;
        if worst >= ofdm.tap_window() {
            return Err(Error::InvalidConfig(alloc::format!(
                "delay_offset + delay_spread = {worst:e} s reaches the tap window {:e} s",
                ofdm.tap_window()
            )));
        }
        Ok(())
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Generates one UE channel per UE id `0..num_ues`.
///
/// Cluster centroids come from [`ScenarioConfig::centroid_sector`]; per-path offsets are uniform within
/// `+-angle_spread / 2` on both axes, with elevation clamped to `[0, pi/2]`.
/// A shared cluster copies every path direction of a randomly chosen cluster
/// of a randomly chosen earlier UE (same scatterer, same AoDs seen from the
/// base station), with fresh gains and delays. Gains are circular complex
/// Gaussian.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Vec<UeChannel>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut ues: Vec<UeChannel> = Vec::with_capacity(cfg.num_ues);
    let half = cfg.angle_spread / 2.0;
    for u in 0..cfg.num_ues {
        let n_clusters = cfg.cluster_count.sample(&mut rng);
        let weights: Vec<f64> = (0..n_clusters)
            .map(|c| ((c + 1) as f64).powf(-cfg.cluster_power_exponent))
            .collect();
        let total: f64 = weights.iter().sum();
        let gain_lin = db_to_linear(cfg.channel_gain_db);
        let mut clusters = Vec::with_capacity(n_clusters);
        for &w in &weights {
            let share = u > 0 && rng.random::<f64>() < cfg.shared_cluster_probability;
            let directions: Vec<Direction> = if share {
                let src_ue = &ues[rng.random_range(0..u)];
                let src = &src_ue.clusters[rng.random_range(0..src_ue.clusters.len())];
                src.paths.iter().map(|p| p.direction).collect()
            } else {
                let (az0, el0) = cfg.centroid_sector.sample(&mut rng);
                let n_paths = cfg.paths_per_cluster.sample(&mut rng);
                (0..n_paths)
                    .map(|_| {
                        let daz = if half > 0.0 {
                            rng.random_range(-half..=half)
                        } else {
                            0.0
                        };
                        let del = if half > 0.0 {
                            rng.random_range(-half..=half)
                        } else {
                            0.0
                        };
                        Direction::clamped(az0 + daz, (el0 + del).clamp(0.0, PI / 2.0))
                    })
                    .collect()
            };
            let path_power = gain_lin * w / total / directions.len() as f64;
            let paths = directions
                .into_iter()
                .map(|direction| {
                    let gain = complex_gaussian(&mut rng) * path_power.sqrt();
                    let delay = cfg.delay_offset + rng.random::<f64>() * cfg.delay_spread;
                    PathComponent {
                        gain,
                        delay,
                        direction,
                    }
                })
                .collect();
            clusters.push(RayCluster { paths });
        }
        ues.push(UeChannel {
            ue_id: u as u32,
            clusters,
        });
    }
    Ok(ues)
}
