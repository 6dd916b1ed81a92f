//! Achievable spectral efficiency, user-cluster selection, estimator error
//! injection, Monte Carlo EIRP sweeps and link-establishment overhead.
//!
//! Per-user SE treats inter-user interference as noise:
//!
//! ```text
//! R_u = (1/K) sum_k log2(1 + (P/N_S) |h_u^T F_RF f_u|^2 / (sigma^2 + (P/N_S) sum_{u' != u} |h_u^T F_RF f_u'|^2))
//! ```
//!
//! always evaluated on the true channels.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::array::{beam, dft_codebook, ArrayConfig, Direction};
use crate::beamspace::{
    compute_beamspace, truncate_paths, AngleGrid, AodList, Beamspace, TruncationMode,
};
use crate::channel::{
    frequency_response, generate_scenario, FrequencyResponse, OfdmConfig, ScenarioConfig,
};
use crate::linalg::{dot_h, dot_t, CMatrix, Cholesky};
#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::math::{db_to_linear, linear_to_db, PI};
use crate::precoding::{
    add_estimation_noise, best_codeword, rzf_precoder_regularized, schedule_order, select_rf_cells,
    DigitalPrecoder, EstimationNoise, LinkConfig, ResidualRule, RfPrecoder,
};
use crate::{seed, Complex64, Error, Result};

/// Adds one subcarrier's contribution to `acc`; `gains[u * n + v]` is
/// `|h_u^T F_RF f_v|^2`.
fn accumulate_rates(acc: &mut [f64], gains: &[f64], link: &LinkConfig) {
    let n = acc.len();
    let p = link.stream_power();
    for u in 0..n {
        let row = &gains[u * n..(u + 1) * n];
        let interference: f64 = row
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != u)
            .map(|(_, g)| g)
            .sum();
        let sinr = p * row[u] / (link.noise_power + p * interference);
        acc[u] += (1.0 + sinr).log2();
    }
}

/// SE of every stream's user, given the true effective channels
/// `rows[u][k]` (already multiplied by `F_RF`, or raw for a fully digital
/// transmitter).
pub fn rates_from_effective(
    rows: &[Vec<Vec<Complex64>>],
    f_bb: &DigitalPrecoder,
    link: &LinkConfig,
) -> Result<Vec<f64>> {
    let n = rows.len();
    if n != f_bb.num_streams() {
        return Err(Error::ShapeMismatch("one stream per user required".into()));
    }
    let k_count = f_bb.num_subcarriers();
    if rows
        .iter()
        .any(|r| r.len() != k_count || r.iter().any(|h| h.len() != f_bb.input_dim()))
    {
        return Err(Error::ShapeMismatch(
            "effective channels and precoder differ".into(),
        ));
    }
    let mut acc = vec![0.0; n];
    let mut gains = vec![0.0; n * n];
    for (k, f) in f_bb.matrices().iter().enumerate() {
        for v in 0..n {
            let col = f.column(v);
            for u in 0..n {
                gains[u * n + v] = dot_t(&rows[u][k], &col).norm_sqr();
            }
        }
        accumulate_rates(&mut acc, &gains, link);
    }
    Ok(acc.into_iter().map(|r| r / k_count as f64).collect())
}

/// Achievable SE of user `u` (bps/Hz). `f_rf = None` means a fully digital
/// transmitter (identity RF stage).
pub fn user_se(
    h: &FrequencyResponse,
    f_rf: Option<&RfPrecoder>,
    f_bb: &DigitalPrecoder,
    link: &LinkConfig,
    u: usize,
) -> Result<f64> {
    if u >= f_bb.num_streams() {
        return Err(Error::ShapeMismatch("user index out of range".into()));
    }
    if h.num_subcarriers() != f_bb.num_subcarriers() {
        return Err(Error::ShapeMismatch(
            "channel and precoder subcarrier counts differ".into(),
        ));
    }
    let dim = match f_rf {
        Some(f) if f.num_antennas() != h.num_antennas() => {
            return Err(Error::ShapeMismatch(
                "channel and RF precoder sizes differ".into(),
            ))
        }
        Some(f) => f.num_rf(),
        None => h.num_antennas(),
    };
    if dim != f_bb.input_dim() {
        return Err(Error::ShapeMismatch(
            "RF and digital precoder sizes differ".into(),
        ));
    }
    let n = f_bb.num_streams();
    let mut total = 0.0;
    let mut gains = vec![0.0; n];
    for k in 0..h.num_subcarriers() {
        let eff = match f_rf {
            Some(f) => f.effective_channel(h.vectorized(k)),
            None => h.vectorized(k).to_vec(),
        };
        let fk = f_bb.matrix(k);
        for (v, g) in gains.iter_mut().enumerate() {
            *g = dot_t(&eff, &fk.column(v)).norm_sqr();
        }
        let p = link.stream_power();
        let interference: f64 = gains
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != u)
            .map(|(_, g)| g)
            .sum();
        total += (1.0 + p * gains[u] / (link.noise_power + p * interference)).log2();
    }
    Ok(total / h.num_subcarriers() as f64)
}

pub fn sum_se(per_user: &[f64]) -> f64 {
    per_user.iter().sum()
}

/// Synthetic stand-in for a learned AoD estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorErrorModel {
    /// Standard deviation of the i.i.d. azimuth and elevation offsets, radians.
    pub angular_std: f64,
    pub miss_probability: f64,
    /// Mean number of spurious paths per AoD-list.
    pub false_path_rate: f64,
    pub seed: u64,
}

impl EstimatorErrorModel {
    /// Angular noise only.
    pub fn angular(angular_std: f64, seed: u64) -> Self {
        Self {
            angular_std,
            miss_probability: 0.0,
            false_path_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angular_std >= 0.0) || !self.angular_std.is_finite() {
            return Err(Error::InvalidConfig(
                "angular_std must be finite and >= 0".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.miss_probability) {
            return Err(Error::InvalidConfig(
                "miss_probability must lie in [0, 1]".into(),
            ));
        }
        if !(self.false_path_rate >= 0.0) || !self.false_path_rate.is_finite() {
            return Err(Error::InvalidConfig(
                "false_path_rate must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Drops, jitters and pads a ground-truth AoD-list. Spurious paths are
/// uniform over the upper hemisphere and form one extra cluster.
pub fn perturb_beamspace_estimate(truth: &AodList, model: &EstimatorErrorModel) -> Result<AodList> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut clusters: Vec<Vec<Direction>> = Vec::with_capacity(truth.clusters().len() + 1);
    for cluster in truth.clusters() {
        let mut kept = Vec::with_capacity(cluster.len());
        for d in cluster {
            let miss = rng.random::<f64>() < model.miss_probability;
            let da: f64 = rng.sample(StandardNormal);
            let de: f64 = rng.sample(StandardNormal);
            if !miss {
                let el = (d.elevation() + de * model.angular_std).clamp(0.0, PI);
                kept.push(Direction::clamped(d.azimuth() + da * model.angular_std, el));
            }
        }
        clusters.push(kept);
    }
    if model.false_path_rate > 0.0 {
        let count = Poisson::new(model.false_path_rate)
            .map_err(|_| Error::InvalidConfig("false_path_rate".into()))?
            .sample(&mut rng) as usize;
        let spurious = (0..count)
            .map(|_| Direction::clamped(rng.random_range(-PI..PI), rng.random::<f64>().acos()))
            .collect();
        clusters.push(spurious);
    }
    Ok(AodList::new(clusters))
}

/// All size-`u` subsets of `0..n` in lexicographic order.
pub fn enumerate_user_clusters(n: usize, u: usize) -> Result<Vec<Vec<usize>>> {
    if u == 0 || u > n {
        return Err(Error::InvalidConfig(alloc::format!(
            "cannot pick {u} of {n} UEs"
        )));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..u).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..u).rev().find(|&i| idx[i] != i + n - u) else {
            return Ok(out);
        };
        idx[i] += 1;
        for j in i + 1..u {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Per-user SE of one user-cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterOutcome {
    pub members: Vec<u32>,
    pub per_user_se: Vec<f64>,
}

/// For every UE, the cluster where it reaches its highest SE (ties to the
/// lexicographically smallest member list). Returns the deduplicated indices
/// into `table`, ascending.
pub fn select_best_clusters(table: &[ClusterOutcome]) -> Result<Vec<usize>> {
    if table.is_empty() {
        return Err(Error::EmptyInput("no user-clusters"));
    }
    let mut best: BTreeMap<u32, usize> = BTreeMap::new();
    for (ci, c) in table.iter().enumerate() {
        if c.members.len() != c.per_user_se.len() {
            return Err(Error::ShapeMismatch(
                "cluster members and SE values differ".into(),
            ));
        }
        for (&ue, &se) in c.members.iter().zip(&c.per_user_se) {
            let replace = match best.get(&ue) {
                None => true,
                Some(&bi) => {
                    let cur = &table[bi];
                    let cur_se =
                        cur.per_user_se[cur.members.iter().position(|&m| m == ue).unwrap()];
                    se > cur_se || (se == cur_se && c.members < cur.members)
                }
            };
            if replace {
                best.insert(ue, ci);
            }
        }
    }
    let mut picked: Vec<usize> = best.into_values().collect();
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts) + 30.0
}

/// Conducted transmit power for a target EIRP: the array adds
/// `10 log10(n_x n_y)` dB of coherent gain.
pub fn tx_power_dbm(eirp_dbm: f64, arr: &ArrayConfig) -> f64 {
    eirp_dbm - linear_to_db(arr.num_elements() as f64)
}

pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 7.0;

/// Thermal noise over the occupied bandwidth `K * subcarrier_spacing`.
pub fn thermal_noise_dbm(ofdm: &OfdmConfig, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ
        + linear_to_db(ofdm.num_subcarriers as f64 * ofdm.subcarrier_spacing)
        + noise_figure_db
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OverheadReport {
    /// Exhaustive 64-beam SSB sweep duration, ms.
    pub ssb_ms: f64,
    /// One pilot symbol per RF chain, ms.
    pub preamble_ms: f64,
    pub reduction_factor: u32,
}

/// Number of SSBs in an exhaustive beam sweep.
pub const SSB_BURST: u32 = 64;

pub fn overhead_report(n_rf: usize, subcarrier_spacing: f64) -> Result<OverheadReport> {
    if n_rf == 0 {
        return Err(Error::InvalidConfig("need at least one RF chain".into()));
    }
    if !(subcarrier_spacing > 0.0) || !subcarrier_spacing.is_finite() {
        return Err(Error::InvalidConfig(
            "subcarrier spacing must be positive".into(),
        ));
    }
    Ok(OverheadReport {
        ssb_ms: 5.0 / SSB_BURST as f64,
        preamble_ms: n_rf as f64 * 1e3 / subcarrier_spacing,
        reduction_factor: SSB_BURST,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Two-stage hybrid precoding on the estimator's AoD-lists.
    Algorithm1,
    /// Two-stage hybrid precoding on the true (truncated) AoD-lists.
    GroundTruthBeamspace,
    /// Per-user best DFT codeword plus RZF.
    BeamPrediction,
    /// Fully digital RZF with perfect CSI.
    FullCsi,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::FullCsi,
        Strategy::GroundTruthBeamspace,
        Strategy::Algorithm1,
        Strategy::BeamPrediction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Algorithm1 => "algorithm1",
            Strategy::GroundTruthBeamspace => "ground_truth_beamspace",
            Strategy::BeamPrediction => "beam_prediction",
            Strategy::FullCsi => "full_csi",
        }
    }
}

impl core::fmt::Display for Strategy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown strategy {s:?}")))
    }
}

/// An externally predicted channel description for one UE.
#[derive(Clone, Debug, PartialEq)]
pub enum ProvidedEstimate {
    Aods(AodList),
    /// A ready-made beamspace on the sweep grid, with the predicted path
    /// count used for scheduling.
    Beamspace {
        beamspace: Beamspace,
        num_paths: usize,
    },
}

/// Source of the beamspaces used by [`Strategy::Algorithm1`].
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Estimator {
    #[default]
    GroundTruth,
    /// The error model's seed is re-derived per trial and UE.
    Perturbed(EstimatorErrorModel),
    /// External predictions keyed by `(trial, ue_id)`.
    Provided(BTreeMap<(usize, u32), ProvidedEstimate>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// `rng_seed` is ignored; each trial's scenario seed is derived from
    /// `seed`.
    pub scenario: ScenarioConfig,
    pub ofdm: OfdmConfig,
    pub array: ArrayConfig,
    pub grid: AngleGrid,
    /// UEs served at once (`U = N_S = N_RF`).
    pub users_per_cluster: usize,
    pub eirp_dbm: Vec<f64>,
    pub noise_power_dbm: f64,
    pub strategies: Vec<Strategy>,
    pub trials: usize,
    pub truncation_budget: usize,
    pub truncation_mode: TruncationMode,
    pub estimation_noise: EstimationNoise,
    pub residual_rule: ResidualRule,
    pub codebook_oversampling: usize,
    pub estimator: Estimator,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.ofdm.validate()?;
        self.scenario.check_tap_window(&self.ofdm)?;
        self.array.validate()?;
        if self.eirp_dbm.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidConfig(
                "EIRP grid and strategy list must be nonempty".into(),
            ));
        }
        if self.eirp_dbm.iter().any(|e| !e.is_finite()) || !self.noise_power_dbm.is_finite() {
            return Err(Error::NonFinite("power levels"));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        if self.truncation_budget == 0 {
            return Err(Error::InvalidConfig(
                "truncation budget must be >= 1".into(),
            ));
        }
        if self.users_per_cluster == 0 || self.users_per_cluster > self.scenario.num_ues {
            return Err(Error::InvalidConfig(
                "users_per_cluster must be in 1..=num_ues".into(),
            ));
        }
        if self.codebook_oversampling == 0 {
            return Err(Error::InvalidConfig(
                "codebook oversampling must be >= 1".into(),
            ));
        }
        if let Estimator::Perturbed(m) = &self.estimator {
            m.validate()?;
        }
        Ok(())
    }

    /// Link budget at one EIRP point.
    pub fn link(&self, eirp_dbm: f64) -> Result<LinkConfig> {
        LinkConfig::new(
            dbm_to_watts(tx_power_dbm(eirp_dbm, &self.array)),
            dbm_to_watts(self.noise_power_dbm),
            self.users_per_cluster,
        )
    }

    /// Scenario seed of one trial.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        seed::derive(self.seed, &[0x5CE7, trial as u64])
    }
}

/// One user's SE inside one selected user-cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct SeRecord {
    pub strategy: Strategy,
    pub eirp_dbm: f64,
    pub trial: usize,
    pub cluster: Vec<u32>,
    pub ue_id: u32,
    pub se: f64,
    /// Sum-SE of the whole cluster.
    pub sum_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub strategy: Strategy,
    pub eirp_dbm: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    /// Number of (trial, selected cluster) sum-SE samples.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<SeRecord>,
    pub trials: usize,
}

impl SweepReport {
    /// Reduces per-trial records (in trial order) into percentile rows, one
    /// per strategy and EIRP point in configuration order.
    pub fn from_trials(cfg: &SweepConfig, per_trial: Vec<Vec<SeRecord>>) -> Self {
        let trials = per_trial.len();
        let records: Vec<SeRecord> = per_trial.into_iter().flatten().collect();
        let mut rows = Vec::new();
        for &strategy in &cfg.strategies {
            for &eirp in &cfg.eirp_dbm {
                let mut samples: Vec<f64> = Vec::new();
                let mut last: Option<(usize, &[u32])> = None;
                for r in records
                    .iter()
                    .filter(|r| r.strategy == strategy && r.eirp_dbm == eirp)
                {
                    let key = (r.trial, &r.cluster[..]);
                    if last != Some(key) {
                        samples.push(r.sum_se);
                        last = Some(key);
                    }
                }
                samples.sort_by(f64::total_cmp);
                rows.push(SummaryRow {
                    strategy,
                    eirp_dbm: eirp,
                    median: percentile(&samples, 0.5),
                    p25: percentile(&samples, 0.25),
                    p75: percentile(&samples, 0.75),
                    samples: samples.len(),
                });
            }
        }
        Self {
            rows,
            records,
            trials,
        }
    }

    pub fn row(&self, strategy: Strategy, eirp_dbm: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.eirp_dbm == eirp_dbm)
    }
}

/// Linear interpolation between order statistics of an ascending slice;
/// NaN when empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum BeamKey {
    Cell(usize),
    Codeword(usize),
}

/// Precomputed per-trial quantities shared by every user-cluster.
struct Trial<'a> {
    cfg: &'a SweepConfig,
    channels: Vec<FrequencyResponse>,
    codebook: Vec<crate::array::Codeword>,
    /// `gram[k][(a, b)] = h_a[k]^T conj(h_b[k])` over all UEs.
    gram: Vec<CMatrix>,
    /// `h_a[k]^T w` per (UE, beam).
    beam_gains: BTreeMap<(usize, BeamKey), Vec<Complex64>>,
}

impl Trial<'_> {
    fn beam_gain(&mut self, ue: usize, key: BeamKey) -> &[Complex64] {
        if !self.beam_gains.contains_key(&(ue, key)) {
            let w = match key {
                BeamKey::Cell(idx) => {
                    let (i, j) = self.cfg.grid.cell(idx);
                    beam(&self.cfg.grid.direction(i, j), &self.cfg.array)
                }
                BeamKey::Codeword(c) => self.codebook[c].weights.clone(),
            };
            let h = &self.channels[ue];
            let g = (0..h.num_subcarriers())
                .map(|k| dot_t(h.vectorized(k), &w))
                .collect();
            self.beam_gains.insert((ue, key), g);
        }
        &self.beam_gains[&(ue, key)]
    }

    /// Hybrid SE of `members` with RF beams `beams` at every EIRP point.
    fn hybrid_rates(
        &mut self,
        members: &[usize],
        beams: &[BeamKey],
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let k_count = self.channels[0].num_subcarriers();
        let mut exact: Vec<Vec<Vec<Complex64>>> =
            vec![vec![Vec::with_capacity(beams.len()); k_count]; members.len()];
        for (u, &ue) in members.iter().enumerate() {
            for &b in beams {
                let g = self.beam_gain(ue, b).to_vec();
                for (k, v) in g.into_iter().enumerate() {
                    exact[u][k].push(v);
                }
            }
        }
        let mut out = Vec::with_capacity(self.cfg.eirp_dbm.len());
        for &eirp in &self.cfg.eirp_dbm {
            let link = self.cfg.link(eirp)?;
            let est = add_estimation_noise(exact.clone(), &link, self.cfg.estimation_noise, seed)?;
            let f_bb = rzf_precoder_regularized(&est, link.rzf_regularizer())?;
            out.push(rates_from_effective(&exact, &f_bb, &link)?);
        }
        Ok(out)
    }

    /// Fully digital RZF on perfect CSI, evaluated through the Gram matrix:
    /// with `f_v = H^H x_v / |H^H x_v|`, the gains are
    /// `h_u^T f_v = (W x_v)_u / sqrt(x_v^H W x_v)`.
    fn full_csi_rates(&self, members: &[usize]) -> Result<Vec<Vec<f64>>> {
        let n = members.len();
        let mut out = Vec::with_capacity(self.cfg.eirp_dbm.len());
        for &eirp in &self.cfg.eirp_dbm {
            let link = self.cfg.link(eirp)?;
            let mut acc = vec![0.0; n];
            let mut gains = vec![0.0; n * n];
            for g in &self.gram {
                let mut w = CMatrix::zeros(n, n);
                for (i, &a) in members.iter().enumerate() {
                    for (j, &b) in members.iter().enumerate() {
                        w[(i, j)] = g[(a, b)];
                    }
                }
                let mut reg = w.clone();
                for i in 0..n {
                    reg[(i, i)] += Complex64::new(link.rzf_regularizer(), 0.0);
                }
                let chol = Cholesky::new(&reg)?;
                for v in 0..n {
                    let mut e = vec![Complex64::new(0.0, 0.0); n];
                    e[v] = Complex64::new(1.0, 0.0);
                    let x = chol.solve(&e);
                    let wx: Vec<Complex64> = (0..n)
                        .map(|u| (0..n).map(|i| w[(u, i)] * x[i]).sum())
                        .collect();
                    let norm_sq = dot_h(&x, &wx).re;
                    if !(norm_sq > 0.0) {
                        return Err(Error::ZeroChannel);
                    }
                    for u in 0..n {
                        gains[u * n + v] = wx[u].norm_sqr() / norm_sq;
                    }
                }
                accumulate_rates(&mut acc, &gains, &link);
            }
            let k = self.gram.len() as f64;
            out.push(acc.into_iter().map(|r| r / k).collect());
        }
        Ok(out)
    }
}

/// Beamspace and scheduling key of one UE.
struct Predicted {
    num_paths: usize,
    beamspace: Beamspace,
}

fn predict(aods: &AodList, cfg: &SweepConfig) -> Predicted {
    Predicted {
        num_paths: aods.num_paths(),
        beamspace: compute_beamspace(aods, &cfg.grid, &cfg.array),
    }
}

fn hybrid_beams(
    preds: &[&Predicted],
    members: &[usize],
    cfg: &SweepConfig,
) -> Result<Vec<BeamKey>> {
    let keys: Vec<(u32, usize)> = members
        .iter()
        .map(|&m| (m as u32, preds[m].num_paths))
        .collect();
    let ordered: Vec<Beamspace> = schedule_order(&keys)
        .into_iter()
        .map(|i| preds[members[i]].beamspace.clone())
        .collect();
    Ok(select_rf_cells(&ordered, cfg.residual_rule)?
        .into_iter()
        .map(|(i, j)| BeamKey::Cell(cfg.grid.index(i, j)))
        .collect())
}

/// Every strategy, EIRP point and selected user-cluster of one trial.
pub fn run_trial(cfg: &SweepConfig, trial: usize) -> Result<Vec<SeRecord>> {
    cfg.validate()?;
    let scenario = ScenarioConfig {
        rng_seed: cfg.trial_seed(trial),
        ..cfg.scenario
    };
    let ues = generate_scenario(&scenario)?;
    let channels = ues
        .iter()
        .map(|ue| frequency_response(ue, &cfg.ofdm, &cfg.array))
        .collect::<Result<Vec<_>>>()?;
    let n_ues = ues.len();
    let k_count = cfg.ofdm.num_subcarriers;
    let mut gram = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut g = CMatrix::zeros(n_ues, n_ues);
        for a in 0..n_ues {
            for b in 0..=a {
                let v = dot_h(channels[b].vectorized(k), channels[a].vectorized(k));
                g[(a, b)] = v;
                g[(b, a)] = v.conj();
            }
        }
        gram.push(g);
    }
    let truth: Vec<AodList> = ues
        .iter()
        .map(|ue| truncate_paths(ue, cfg.truncation_budget, cfg.truncation_mode))
        .collect();

    let wants = |s: Strategy| cfg.strategies.contains(&s);
    let gt_pred: Vec<Predicted> = if wants(Strategy::GroundTruthBeamspace)
        || (wants(Strategy::Algorithm1) && cfg.estimator == Estimator::GroundTruth)
    {
        truth.iter().map(|a| predict(a, cfg)).collect()
    } else {
        Vec::new()
    };
    let est_pred: Vec<Predicted> = match (&cfg.estimator, wants(Strategy::Algorithm1)) {
        (Estimator::Perturbed(model), true) => truth
            .iter()
            .enumerate()
            .map(|(u, a)| {
                let m = EstimatorErrorModel {
                    seed: seed::derive(model.seed, &[trial as u64, u as u64]),
                    ..*model
                };
                perturb_beamspace_estimate(a, &m).map(|p| predict(&p, cfg))
            })
            .collect::<Result<_>>()?,
        (Estimator::Provided(map), true) => ues
            .iter()
            .map(|ue| match map.get(&(trial, ue.ue_id)) {
                None => Err(Error::MissingEstimate {
                    trial,
                    ue_id: ue.ue_id,
                }),
                Some(ProvidedEstimate::Aods(a)) => Ok(predict(a, cfg)),
                Some(ProvidedEstimate::Beamspace {
                    beamspace,
                    num_paths,
                }) => {
                    if beamspace.grid() != &cfg.grid {
                        return Err(Error::GridMismatch);
                    }
                    Ok(Predicted {
                        num_paths: *num_paths,
                        beamspace: beamspace.clone(),
                    })
                }
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let codebook = if wants(Strategy::BeamPrediction) {
        dft_codebook(&cfg.array, cfg.codebook_oversampling)?
    } else {
        Vec::new()
    };
    let bp_pick: Vec<usize> = if wants(Strategy::BeamPrediction) {
        channels
            .iter()
            .map(|h| best_codeword(h, &codebook))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut ctx = Trial {
        cfg,
        channels,
        codebook,
        gram,
        beam_gains: BTreeMap::new(),
    };
    let clusters = enumerate_user_clusters(n_ues, cfg.users_per_cluster)?;
    let mut records = Vec::new();
    for &strategy in &cfg.strategies {
        let preds: Vec<&Predicted> = match (strategy, &cfg.estimator) {
            (Strategy::GroundTruthBeamspace, _)
            | (Strategy::Algorithm1, Estimator::GroundTruth) => gt_pred.iter().collect(),
            (Strategy::Algorithm1, _) => est_pred.iter().collect(),
            _ => Vec::new(),
        };
        // rates[c][e][u]
        let mut rates = Vec::with_capacity(clusters.len());
        for (ci, members) in clusters.iter().enumerate() {
            // Pilot noise belongs to the trial and user-cluster, not the
            // strategy, so hybrid strategies are compared on the same draws.
            let noise_seed = seed::derive(cfg.seed, &[0xE57, trial as u64, ci as u64]);
            let r = match strategy {
                Strategy::FullCsi => ctx.full_csi_rates(members)?,
                Strategy::BeamPrediction => {
                    let beams: Vec<BeamKey> = members
                        .iter()
                        .map(|&m| BeamKey::Codeword(bp_pick[m]))
                        .collect();
                    ctx.hybrid_rates(members, &beams, noise_seed)?
                }
                Strategy::Algorithm1 | Strategy::GroundTruthBeamspace => {
                    let beams = hybrid_beams(&preds, members, cfg)?;
                    ctx.hybrid_rates(members, &beams, noise_seed)?
                }
            };
            rates.push(r);
        }
        for (e, &eirp) in cfg.eirp_dbm.iter().enumerate() {
            let table: Vec<ClusterOutcome> = clusters
                .iter()
                .zip(&rates)
                .map(|(m, r)| ClusterOutcome {
                    members: m.iter().map(|&i| ues[i].ue_id).collect(),
                    per_user_se: r[e].clone(),
                })
                .collect();
            for ci in select_best_clusters(&table)? {
                let c = &table[ci];
                let total = sum_se(&c.per_user_se);
                for (&ue_id, &se) in c.members.iter().zip(&c.per_user_se) {
                    records.push(SeRecord {
                        strategy,
                        eirp_dbm: eirp,
                        trial,
                        cluster: c.members.clone(),
                        ue_id,
                        se,
                        sum_se: total,
                    });
                }
            }
        }
    }
    Ok(records)
}

/// Sequential sweep; identical to running [`run_trial`] for every trial in
/// any order and reducing with [`SweepReport::from_trials`].
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let per_trial = (0..cfg.trials)
        .map(|t| run_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::from_trials(cfg, per_trial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::IntRange;
    use crate::precoding::full_csi_baseline;

    #[test]
    fn se_arithmetic() {
        let link = LinkConfig::new(1.0, 1.0, 1).unwrap();
        let mut acc = [0.0];
        accumulate_rates(&mut acc, &[1.0], &link);
        assert!((acc[0] - 1.0).abs() < 1e-15);
        accumulate_rates(&mut acc, &[3.0], &link);
        assert!((acc[0] / 2.0 - 1.5).abs() < 1e-15);
        let mut acc = [0.0];
        accumulate_rates(&mut acc, &[0.0], &link);
        assert_eq!(acc[0], 0.0);
        assert_eq!(sum_se(&[1.0, 2.0]), 3.0);
        assert_eq!(sum_se(&[]), 0.0);
    }

    #[test]
    fn clusters_enumerate_lexicographically() {
        assert_eq!(
            enumerate_user_clusters(3, 2).unwrap(),
            vec![vec![0, 1], vec![0, 2], vec![1, 2]]
        );
        assert_eq!(enumerate_user_clusters(10, 4).unwrap().len(), 210);
        assert_eq!(
            enumerate_user_clusters(5, 5).unwrap(),
            vec![vec![0, 1, 2, 3, 4]]
        );
        assert!(enumerate_user_clusters(2, 3).is_err());
    }

    #[test]
    fn best_cluster_union() {
        let t = vec![
            ClusterOutcome {
                members: vec![0, 1],
                per_user_se: vec![3.0, 1.0],
            },
            ClusterOutcome {
                members: vec![0, 2],
                per_user_se: vec![1.0, 1.0],
            },
            ClusterOutcome {
                members: vec![1, 2],
                per_user_se: vec![2.0, 1.0],
            },
        ];
        // UE 0 -> 0, UE 1 -> 2, UE 2 ties between 1 and 2 -> 1.
        assert_eq!(select_best_clusters(&t).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_best_clusters(&t[..1]).unwrap(), vec![0]);
        assert!(select_best_clusters(&[]).is_err());
    }

    #[test]
    fn overhead_figures() {
        let r = overhead_report(10, 120e3).unwrap();
        assert_eq!(r.ssb_ms, 5.0 / 64.0);
        assert!((r.preamble_ms - 0.083).abs() < 5e-4);
        assert_eq!(r.reduction_factor, 64);
        assert!((overhead_report(1, 120e3).unwrap().preamble_ms - 1.0 / 120.0).abs() < 1e-15);
        assert!(overhead_report(0, 120e3).is_err());
    }

    #[test]
    fn percentiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&s, 0.5), 2.5);
        assert_eq!(percentile(&s, 0.25), 1.75);
        assert_eq!(percentile(&[7.0], 0.9), 7.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn perturbation_limits() {
        let truth = AodList::new(vec![
            vec![Direction::from_degrees(10.0, 40.0).unwrap()],
            vec![
                Direction::from_degrees(-70.0, 80.0).unwrap(),
                Direction::from_degrees(5.0, 5.0).unwrap(),
            ],
        ]);
        let same =
            perturb_beamspace_estimate(&truth, &EstimatorErrorModel::angular(0.0, 3)).unwrap();
        assert_eq!(same, truth);
        let all_missed = EstimatorErrorModel {
            miss_probability: 1.0,
            ..EstimatorErrorModel::angular(0.1, 3)
        };
        assert!(perturb_beamspace_estimate(&truth, &all_missed)
            .unwrap()
            .is_empty());
        let spurious = EstimatorErrorModel {
            false_path_rate: 50.0,
            ..EstimatorErrorModel::angular(0.0, 3)
        };
        let p = perturb_beamspace_estimate(&truth, &spurious).unwrap();
        assert!(p.num_paths() > truth.num_paths());
        assert!(p
            .directions()
            .all(|d| d.elevation() <= PI / 2.0 + 1e-12 || truth.directions().any(|t| t == d)));
        let bad = EstimatorErrorModel {
            miss_probability: 1.5,
            ..EstimatorErrorModel::angular(0.0, 3)
        };
        assert!(perturb_beamspace_estimate(&truth, &bad).is_err());
    }

    fn tiny_cfg(strategies: Vec<Strategy>) -> SweepConfig {
        let ofdm = OfdmConfig::new(8, 120e3, 4);
        SweepConfig {
            scenario: ScenarioConfig {
                num_ues: 4,
                cluster_count: IntRange::new(1, 3),
                paths_per_cluster: IntRange::new(1, 4),
                centroid_sector: Default::default(),
                angle_spread: 0.1,
                delay_offset: ofdm.sample_period,
                delay_spread: ofdm.sample_period,
                shared_cluster_probability: 0.5,
                cluster_power_exponent: 1.0,
                channel_gain_db: -100.0,
                rng_seed: 0,
            },
            ofdm,
            array: ArrayConfig::new(4, 2).unwrap(),
            grid: AngleGrid::new(16, 8).unwrap(),
            users_per_cluster: 2,
            eirp_dbm: vec![20.0, 40.0],
            noise_power_dbm: thermal_noise_dbm(&ofdm, DEFAULT_NOISE_FIGURE_DB),
            strategies,
            trials: 2,
            truncation_budget: 25,
            truncation_mode: TruncationMode::Global,
            estimation_noise: EstimationNoise::default(),
            residual_rule: ResidualRule::Estimated,
            codebook_oversampling: 1,
            estimator: Estimator::Perturbed(EstimatorErrorModel::angular(0.1, 5)),
            seed: 11,
        }
    }

    #[test]
    fn sweep_shape_and_determinism() {
        let cfg = tiny_cfg(Strategy::ALL.to_vec());
        let a = run_sweep(&cfg).unwrap();
        assert_eq!(a.rows.len(), 8);
        for r in &a.rows {
            assert!(r.p25 <= r.median && r.median <= r.p75, "{r:?}");
            assert!(r.samples >= cfg.trials);
        }
        assert_eq!(a, run_sweep(&cfg).unwrap());
        // Trial order of evaluation does not matter.
        let rev: Vec<_> = (0..cfg.trials)
            .rev()
            .map(|t| run_trial(&cfg, t).unwrap())
            .rev()
            .collect();
        assert_eq!(SweepReport::from_trials(&cfg, rev), a);
        let only = run_sweep(&SweepConfig {
            trials: 1,
            ..tiny_cfg(vec![Strategy::FullCsi])
        })
        .unwrap();
        assert_eq!(only.rows.len(), 2);
    }

    #[test]
    fn gram_path_matches_explicit_full_csi() {
        let cfg = tiny_cfg(vec![Strategy::FullCsi]);
        let records = run_trial(&cfg, 0).unwrap();
        let r = &records[0];
        let scenario = ScenarioConfig {
            rng_seed: cfg.trial_seed(0),
            ..cfg.scenario
        };
        let ues = generate_scenario(&scenario).unwrap();
        let chans: Vec<FrequencyResponse> = r
            .cluster
            .iter()
            .map(|&id| frequency_response(&ues[id as usize], &cfg.ofdm, &cfg.array).unwrap())
            .collect();
        let link = cfg.link(r.eirp_dbm).unwrap();
        let f_bb = full_csi_baseline(&chans, &link).unwrap();
        let pos = r.cluster.iter().position(|&id| id == r.ue_id).unwrap();
        let se = user_se(&chans[pos], None, &f_bb, &link, pos).unwrap();
        assert!((se - r.se).abs() < 1e-9, "{se} vs {}", r.se);
    }

    #[test]
    fn provided_estimator_needs_every_ue() {
        let mut cfg = tiny_cfg(vec![Strategy::Algorithm1]);
        cfg.trials = 1;
        cfg.estimator = Estimator::Provided(BTreeMap::new());
        assert_eq!(
            run_trial(&cfg, 0),
            Err(Error::MissingEstimate { trial: 0, ue_id: 0 })
        );
    }
}
