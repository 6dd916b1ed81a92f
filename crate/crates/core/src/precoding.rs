//! Two-stage hybrid precoding.
//!
//! Stage one picks one analog beam per user from predicted beamspaces,
//! scheduling users with fewer predicted paths first and steering each later
//! user away from what earlier users already cover (residual beamspace).
//! Stage two estimates the effective channels `h_u^T[k] F_RF` from pilots and
//! designs a per-subcarrier RZF digital precoder with unit-norm columns:
//!
//! ```text
//! f_u[k] = normalize( (sum_{u'} conj(h_u'[k]) h_u'^T[k] + I)^{-1} conj(h_u[k]) )
//! ```
//!
//! [`rzf_precoder`] applies this literally. The pipelines in this module apply
//! it to channels expressed in noise-normalized units (scaled by
//! `sqrt(P / (N_S sigma^2))`), which is the same as using the regularizer
//! `N_S sigma^2 / P` on the raw channels; see [`LinkConfig::rzf_regularizer`].

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{beam, ArrayConfig, Codeword, Direction};
use crate::beamspace::{argmax_excluding, Beamspace};
use crate::channel::FrequencyResponse;
use crate::linalg::{dot_h, dot_t, norm, CMatrix, Cholesky};
use crate::math::db_to_linear;
#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::{seed, Complex64, Error, Result};

/// Frequency-flat analog precoder, one constant-modulus column per RF chain.
#[derive(Clone, Debug, PartialEq)]
pub struct RfPrecoder {
    columns: Vec<Vec<Complex64>>,
    directions: Vec<Direction>,
}

impl RfPrecoder {
    /// Columns `vec(conj(A(theta, phi)))`, entry magnitude `1/sqrt(n_x n_y)`.
    pub fn from_directions(directions: &[Direction], arr: &ArrayConfig) -> Self {
        Self {
            columns: directions.iter().map(|d| beam(d, arr)).collect(),
            directions: directions.to_vec(),
        }
    }

    pub fn from_codewords(codewords: &[&Codeword]) -> Self {
        Self {
            columns: codewords.iter().map(|c| c.weights.clone()).collect(),
            directions: codewords.iter().map(|c| c.direction).collect(),
        }
    }

    pub fn columns(&self) -> &[Vec<Complex64>] {
        &self.columns
    }

    /// Steering direction of each column.
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn num_rf(&self) -> usize {
        self.columns.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    /// `h^T F_RF`.
    pub fn effective_channel(&self, h: &[Complex64]) -> Vec<Complex64> {
        self.columns.iter().map(|f| dot_t(h, f)).collect()
    }
}

/// Per-subcarrier digital precoders, each `dim x N_S` with unit-norm columns.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitalPrecoder {
    per_subcarrier: Vec<CMatrix>,
}

impl DigitalPrecoder {
    pub fn from_matrices(per_subcarrier: Vec<CMatrix>) -> Result<Self> {
        let first = per_subcarrier
            .first()
            .ok_or(Error::EmptyInput("digital precoder"))?;
        let shape = (first.rows(), first.cols());
        if per_subcarrier.iter().any(|m| (m.rows(), m.cols()) != shape) {
            return Err(Error::ShapeMismatch(
                "digital precoder matrices differ in shape".into(),
            ));
        }
        Ok(Self { per_subcarrier })
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.per_subcarrier
    }

    pub fn matrix(&self, k: usize) -> &CMatrix {
        &self.per_subcarrier[k]
    }

    pub fn num_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    pub fn num_streams(&self) -> usize {
        self.per_subcarrier[0].cols()
    }

    /// Rows of each matrix: `N_RF` for hybrid, the antenna count for fully
    /// digital precoders.
    pub fn input_dim(&self) -> usize {
        self.per_subcarrier[0].rows()
    }
}

/// Pilot-noise level used when estimating effective channels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EstimationNoise {
    Noiseless,
    /// Per-entry SNR relative to the received pilot power of that user and
    /// subcarrier (mean over RF chains).
    SnrDb(f64),
    /// Estimation SNR this many dB above the data-link per-stream SNR: the
    /// per-entry error variance is `sigma^2 / ((P / N_S) 10^(dB/10))`.
    AboveLinkDb(f64),
}

impl Default for EstimationNoise {
    fn default() -> Self {
        EstimationNoise::AboveLinkDb(10.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkConfig {
    /// Total transmit power `P`, watts.
    pub tx_power: f64,
    /// Receiver noise power `sigma^2`, watts.
    pub noise_power: f64,
    pub num_streams: usize,
    pub num_rf: usize,
}

impl LinkConfig {
    /// `N_S = N_RF = U = num_users`.
    pub fn new(tx_power: f64, noise_power: f64, num_users: usize) -> Result<Self> {
        let link = Self {
            tx_power,
            noise_power,
            num_streams: num_users,
            num_rf: num_users,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power > 0.0) || !self.tx_power.is_finite() {
            return Err(Error::InvalidConfig(
                "transmit power must be positive".into(),
            ));
        }
        if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
            return Err(Error::InvalidConfig("noise power must be positive".into()));
        }
        if self.num_streams == 0 || self.num_streams != self.num_rf {
            return Err(Error::InvalidConfig("need N_S = N_RF >= 1".into()));
        }
        Ok(())
    }

    /// `P / N_S`.
    pub fn stream_power(&self) -> f64 {
        self.tx_power / self.num_streams as f64
    }

    /// Identity weight that makes the RZF solve MMSE-optimal on raw channels.
    pub fn rzf_regularizer(&self) -> f64 {
        self.noise_power / self.stream_power()
    }
}

/// Which beamspaces are subtracted when forming residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ResidualRule {
    /// `G_i - sum_{j<i} G_j` over the earlier users' estimated beamspaces.
    #[default]
    Estimated,
    /// `G_i - sum_{j<i} R_j`, subtracting the earlier residuals instead.
    Residual,
}

/// Noisy per-user, per-subcarrier effective channels `h_u^T[k] F_RF`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveChannelEstimate {
    per_ue: Vec<Vec<Vec<Complex64>>>,
    noise: EstimationNoise,
}

impl EffectiveChannelEstimate {
    /// `per_ue[u][k]` is the estimate for user `u` on subcarrier `k`.
    pub fn new(per_ue: Vec<Vec<Vec<Complex64>>>, noise: EstimationNoise) -> Result<Self> {
        let first = per_ue
            .first()
            .ok_or(Error::EmptyInput("effective channel estimate"))?;
        let k = first.len();
        if k == 0 {
            return Err(Error::EmptyInput("effective channel estimate"));
        }
        let dim = first[0].len();
        for user in &per_ue {
            if user.len() != k || user.iter().any(|h| h.len() != dim) {
                return Err(Error::ShapeMismatch(
                    "ragged effective channel estimate".into(),
                ));
            }
            if user
                .iter()
                .flatten()
                .any(|v| !v.re.is_finite() || !v.im.is_finite())
            {
                return Err(Error::NonFinite("effective channel estimate"));
            }
        }
        Ok(Self { per_ue, noise })
    }

    pub fn num_users(&self) -> usize {
        self.per_ue.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.per_ue[0].len()
    }

    pub fn dim(&self) -> usize {
        self.per_ue[0][0].len()
    }

    pub fn get(&self, u: usize, k: usize) -> &[Complex64] {
        &self.per_ue[u][k]
    }

    pub fn noise(&self) -> EstimationNoise {
        self.noise
    }
}

/// Scheduling order: ascending predicted path count, ties by UE id.
/// Returns indices into the input.
pub fn schedule_order(users: &[(u32, usize)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by_key(|&i| (users[i].1, users[i].0));
    order
}

/// Residual beamspaces for users already in scheduling order. Entries may be
/// negative.
pub fn residual_beamspaces(beamspaces: &[Beamspace], rule: ResidualRule) -> Result<Vec<Vec<f64>>> {
    let Some(first) = beamspaces.first() else {
        return Ok(Vec::new());
    };
    if beamspaces.iter().any(|b| b.grid() != first.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut subtrahend = vec![0.0; first.values().len()];
    let mut out = Vec::with_capacity(beamspaces.len());
    for b in beamspaces {
        let r: Vec<f64> = b
            .values()
            .iter()
            .zip(&subtrahend)
            .map(|(g, s)| g - s)
            .collect();
        let added = match rule {
            ResidualRule::Estimated => b.values(),
            ResidualRule::Residual => &r[..],
        };
        for (s, a) in subtrahend.iter_mut().zip(added) {
            *s += a;
        }
        out.push(r);
    }
    Ok(out)
}

/// Grid cell `(i, j)` chosen for each user (scheduling order).
///
/// Each user takes the peak of its residual over cells not yet taken by
/// earlier users. If that residual is nonpositive everywhere it falls back to
/// the peak of its own beamspace over the same cells.
pub fn select_rf_cells(
    beamspaces: &[Beamspace],
    rule: ResidualRule,
) -> Result<Vec<(usize, usize)>> {
    let residuals = residual_beamspaces(beamspaces, rule)?;
    let mut taken: Vec<usize> = Vec::with_capacity(beamspaces.len());
    for (b, r) in beamspaces.iter().zip(&residuals) {
        let idx = match argmax_excluding(r, &taken) {
            Some(idx) if r[idx] > 0.0 => idx,
            _ => argmax_excluding(b.values(), &taken)
                .ok_or_else(|| Error::InvalidConfig("more users than grid cells".into()))?,
        };
        taken.push(idx);
    }
    let grid = beamspaces.first().map(|b| *b.grid());
    Ok(taken
        .into_iter()
        .map(|idx| grid.unwrap().cell(idx))
        .collect())
}

/// Stage one: one beam per user, columns in scheduling order of the input.
pub fn select_rf_precoders(
    beamspaces: &[Beamspace],
    arr: &ArrayConfig,
    rule: ResidualRule,
) -> Result<RfPrecoder> {
    let cells = select_rf_cells(beamspaces, rule)?;
    let dirs: Vec<Direction> = match beamspaces.first() {
        Some(b) => cells
            .iter()
            .map(|&(i, j)| b.grid().direction(i, j))
            .collect(),
        None => Vec::new(),
    };
    Ok(RfPrecoder::from_directions(&dirs, arr))
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Pilot-based estimate of `h_u^T[k] F_RF` for every user and subcarrier.
pub fn estimate_effective_channels(
    channels: &[FrequencyResponse],
    f_rf: &RfPrecoder,
    link: &LinkConfig,
    noise: EstimationNoise,
    seed: u64,
) -> Result<EffectiveChannelEstimate> {
    if channels.is_empty() {
        return Err(Error::EmptyInput("no channels"));
    }
    let k_count = channels[0].num_subcarriers();
    for h in channels {
        if h.num_subcarriers() != k_count || h.num_antennas() != f_rf.num_antennas() {
            return Err(Error::ShapeMismatch(
                "channel and RF precoder shapes differ".into(),
            ));
        }
    }
    let exact = channels
        .iter()
        .map(|h| {
            (0..k_count)
                .map(|k| f_rf.effective_channel(h.vectorized(k)))
                .collect()
        })
        .collect();
    add_estimation_noise(exact, link, noise, seed)
}

/// Adds pilot noise to exact effective channels `exact[u][k]`. The noise of
/// user `u` comes from a stream derived from `(seed, u)`, so estimates at
/// different noise levels share the same normalized draws.
pub fn add_estimation_noise(
    mut exact: Vec<Vec<Vec<Complex64>>>,
    link: &LinkConfig,
    noise: EstimationNoise,
    seed: u64,
) -> Result<EffectiveChannelEstimate> {
    if noise != EstimationNoise::Noiseless {
        for (u, rows) in exact.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[u as u64]));
            for row in rows.iter_mut() {
                let var = match noise {
                    EstimationNoise::Noiseless => 0.0,
                    EstimationNoise::SnrDb(snr) => {
                        let power =
                            row.iter().map(Complex64::norm_sqr).sum::<f64>() / row.len() as f64;
                        power / db_to_linear(snr)
                    }
                    EstimationNoise::AboveLinkDb(boost) => {
                        link.noise_power / (link.stream_power() * db_to_linear(boost))
                    }
                };
                let sd = var.sqrt();
                for v in row.iter_mut() {
                    *v += complex_gaussian(&mut rng) * sd;
                }
            }
        }
    }
    EffectiveChannelEstimate::new(exact, noise)
}

/// Unit-norm RZF columns for the channel rows `h_u^T`, computed through
/// `(H^H H + r I)^{-1} H^H = H^H (H H^H + r I)^{-1}` so only a `U x U`
/// system is solved.
pub fn rzf_columns(rows: &[&[Complex64]], regularizer: f64) -> Result<CMatrix> {
    let u_count = rows.len();
    if u_count == 0 {
        return Err(Error::EmptyInput("no channel rows"));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::ShapeMismatch("channel rows differ in length".into()));
    }
    if !(regularizer >= 0.0) || !regularizer.is_finite() {
        return Err(Error::InvalidConfig(
            "RZF regularizer must be finite and >= 0".into(),
        ));
    }
    let mut gram = CMatrix::zeros(u_count, u_count);
    for i in 0..u_count {
        for j in 0..=i {
            let g = dot_h(rows[j], rows[i]);
            gram[(i, j)] = g;
            gram[(j, i)] = g.conj();
        }
        gram[(i, i)] += Complex64::new(regularizer, 0.0);
    }
    let chol = Cholesky::new(&gram)?;
    let mut out = CMatrix::zeros(dim, u_count);
    let mut e = vec![Complex64::new(0.0, 0.0); u_count];
    for u in 0..u_count {
        e.fill(Complex64::new(0.0, 0.0));
        e[u] = Complex64::new(1.0, 0.0);
        let x = chol.solve(&e);
        let mut col = vec![Complex64::new(0.0, 0.0); dim];
        for (row, &xi) in rows.iter().zip(&x) {
            for (c, h) in col.iter_mut().zip(row.iter()) {
                *c += h.conj() * xi;
            }
        }
        let n = norm(&col);
        if !n.is_finite() {
            return Err(Error::NonFinite("RZF column"));
        }
        if n == 0.0 {
            return Err(Error::ZeroChannel);
        }
        for (i, c) in col.into_iter().enumerate() {
            out[(i, u)] = c / n;
        }
    }
    Ok(out)
}

/// RZF with identity weight `regularizer` on every subcarrier.
pub fn rzf_precoder_regularized(
    est: &EffectiveChannelEstimate,
    regularizer: f64,
) -> Result<DigitalPrecoder> {
    let mut mats = Vec::with_capacity(est.num_subcarriers());
    for k in 0..est.num_subcarriers() {
        let rows: Vec<&[Complex64]> = (0..est.num_users()).map(|u| est.get(u, k)).collect();
        mats.push(rzf_columns(&rows, regularizer)?);
    }
    DigitalPrecoder::from_matrices(mats)
}

/// RZF exactly as written, with a unit identity regularizer.
pub fn rzf_precoder(est: &EffectiveChannelEstimate) -> Result<DigitalPrecoder> {
    if est.num_users() != est.dim() {
        return Err(Error::ShapeMismatch("RZF needs U = N_RF".into()));
    }
    rzf_precoder_regularized(est, 1.0)
}

/// Fully digital RZF on the exact channels (no RF stage, no estimation
/// noise).
pub fn full_csi_baseline(
    channels: &[FrequencyResponse],
    link: &LinkConfig,
) -> Result<DigitalPrecoder> {
    link.validate()?;
    let first = channels.first().ok_or(Error::EmptyInput("no channels"))?;
    let k_count = first.num_subcarriers();
    if channels
        .iter()
        .any(|h| h.num_subcarriers() != k_count || h.num_antennas() != first.num_antennas())
    {
        return Err(Error::ShapeMismatch("channels differ in shape".into()));
    }
    let mut mats = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let rows: Vec<&[Complex64]> = channels.iter().map(|h| h.vectorized(k)).collect();
        mats.push(rzf_columns(&rows, link.rzf_regularizer())?);
    }
    DigitalPrecoder::from_matrices(mats)
}

/// Index of the codeword maximizing `sum_k |h^T[k] w|^2`; ties go to the
/// first codeword.
pub fn best_codeword(h: &FrequencyResponse, codebook: &[Codeword]) -> Result<usize> {
    if codebook.is_empty() {
        return Err(Error::EmptyInput("empty codebook"));
    }
    if codebook[0].weights.len() != h.num_antennas() {
        return Err(Error::ShapeMismatch(
            "codebook and channel sizes differ".into(),
        ));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, cw) in codebook.iter().enumerate() {
        let gain: f64 = (0..h.num_subcarriers())
            .map(|k| dot_t(h.vectorized(k), &cw.weights).norm_sqr())
            .sum();
        if gain > best.1 {
            best = (i, gain);
        }
    }
    Ok(best.0)
}

/// Stage two on a given RF precoder: estimate, then RZF in noise-normalized
/// units.
pub fn digital_stage(
    channels: &[FrequencyResponse],
    f_rf: &RfPrecoder,
    link: &LinkConfig,
    noise: EstimationNoise,
    seed: u64,
) -> Result<DigitalPrecoder> {
    link.validate()?;
    let est = estimate_effective_channels(channels, f_rf, link, noise, seed)?;
    rzf_precoder_regularized(&est, link.rzf_regularizer())
}

/// Each user independently takes its best DFT codeword; the digital stage is
/// the same as for the beamspace pipeline.
pub fn beam_prediction_baseline(
    channels: &[FrequencyResponse],
    codebook: &[Codeword],
    link: &LinkConfig,
    noise: EstimationNoise,
    seed: u64,
) -> Result<(RfPrecoder, DigitalPrecoder)> {
    let picks = channels
        .iter()
        .map(|h| best_codeword(h, codebook).map(|i| &codebook[i]))
        .collect::<Result<Vec<_>>>()?;
    let f_rf = RfPrecoder::from_codewords(&picks);
    let f_bb = digital_stage(channels, &f_rf, link, noise, seed)?;
    Ok((f_rf, f_bb))
}

/// Stage-one input for one user.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictedUser {
    pub ue_id: u32,
    /// Number of predicted paths (scheduling key).
    pub num_paths: usize,
    pub beamspace: Beamspace,
}

/// Both stages. `users[u]` and `channels[u]` describe the same user; RF
/// columns come out in scheduling order.
pub fn hybrid_precoders(
    users: &[PredictedUser],
    channels: &[FrequencyResponse],
    arr: &ArrayConfig,
    link: &LinkConfig,
    noise: EstimationNoise,
    rule: ResidualRule,
    seed: u64,
) -> Result<(RfPrecoder, DigitalPrecoder)> {
    if users.len() != channels.len() {
        return Err(Error::ShapeMismatch(
            "users and channels differ in count".into(),
        ));
    }
    let keys: Vec<(u32, usize)> = users.iter().map(|u| (u.ue_id, u.num_paths)).collect();
    let ordered: Vec<Beamspace> = schedule_order(&keys)
        .into_iter()
        .map(|i| users[i].beamspace.clone())
        .collect();
    let f_rf = select_rf_precoders(&ordered, arr, rule)?;
    let f_bb = digital_stage(channels, &f_rf, link, noise, seed)?;
    Ok((f_rf, f_bb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamspace::{compute_beamspace, AngleGrid, AodList};
    use crate::channel::{frequency_response, OfdmConfig, PathComponent, RayCluster, UeChannel};

    fn deg(a: f64, e: f64) -> Direction {
        Direction::from_degrees(a, e).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bs(clusters: Vec<Vec<Direction>>, grid: &AngleGrid, arr: &ArrayConfig) -> Beamspace {
        compute_beamspace(&AodList::new(clusters), grid, arr)
    }

    #[test]
    fn schedule_sorts_by_paths_then_id() {
        assert_eq!(
            schedule_order(&[(7, 3), (2, 1), (5, 3), (1, 1)]),
            vec![3, 1, 2, 0]
        );
    }

    #[test]
    fn residual_rules() {
        let grid = AngleGrid::new(4, 2).unwrap();
        let b = |v: Vec<f64>| Beamspace::from_values(grid, v).unwrap();
        let bss = [
            b(vec![1., 0., 0., 0., 0., 0., 0., 0.]),
            b(vec![1., 1., 0., 0., 0., 0., 0., 0.]),
            b(vec![1., 1., 1., 0., 0., 0., 0., 0.]),
        ];
        let r = residual_beamspaces(&bss, ResidualRule::Estimated).unwrap();
        assert_eq!(r[0], bss[0].values());
        assert_eq!(&r[2][..3], &[-1., 0., 1.]);
        let r = residual_beamspaces(&bss, ResidualRule::Residual).unwrap();
        // Residual of user 1 is [0, 1, ...]; user 2 subtracts [1, 0] + [0, 1].
        assert_eq!(&r[2][..3], &[0., 0., 1.]);
        let other = Beamspace::from_values(AngleGrid::new(2, 4).unwrap(), vec![0.; 8]).unwrap();
        assert_eq!(
            residual_beamspaces(&[bss[0].clone(), other], ResidualRule::Estimated),
            Err(Error::GridMismatch)
        );
    }

    #[test]
    fn identical_beamspaces_fall_back_to_distinct_cells() {
        let grid = AngleGrid::new(16, 8).unwrap();
        let arr = ArrayConfig::new(4, 4).unwrap();
        let g = bs(vec![vec![grid.direction(3, 4)]], &grid, &arr);
        let r = residual_beamspaces(&[g.clone(), g.clone()], ResidualRule::Estimated).unwrap();
        assert!(r[1].iter().all(|&v| v <= 0.0));
        let cells = select_rf_cells(&[g.clone(), g], ResidualRule::Estimated).unwrap();
        assert_eq!(cells[0], (3, 4));
        assert_ne!(cells[0], cells[1]);
    }

    #[test]
    fn shared_path_goes_to_user_with_fewer_paths() {
        let grid = AngleGrid::new(64, 32).unwrap();
        let arr = ArrayConfig::new(16, 8).unwrap();
        let shared = deg(45.0, 90.0);
        let own = grid.direction(52, 16);
        let a = bs(vec![vec![shared]], &grid, &arr);
        let b = bs(vec![vec![shared, own]], &grid, &arr);
        let cells = select_rf_cells(&[a.clone(), b.clone()], ResidualRule::Estimated).unwrap();
        assert_eq!(grid.direction(cells[0].0, cells[0].1), shared);
        assert_eq!(cells[0], (40, 16));
        assert_eq!(cells[1], (52, 16));
        let r = residual_beamspaces(&[a, b], ResidualRule::Estimated).unwrap();
        assert!(r[1][grid.index(40, 16)] <= 0.0);
    }

    #[test]
    fn rf_columns_are_constant_modulus() {
        let arr = ArrayConfig::new(8, 4).unwrap();
        let f = RfPrecoder::from_directions(&[deg(10.0, 30.0), deg(-100.0, 80.0)], &arr);
        let m = 1.0 / (32f64).sqrt();
        for col in f.columns() {
            assert!(col.iter().all(|v| (v.norm() - m).abs() < 1e-15));
            assert!((norm(col) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rzf_single_user_is_matched_filter() {
        let h = [c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)];
        let f = rzf_columns(&[&h], 1.0).unwrap();
        let n = norm(&h);
        for i in 0..3 {
            assert!((f[(i, 0)] - h[i].conj() / n).norm() < 1e-14);
        }
    }

    #[test]
    fn rzf_orthogonal_users_do_not_interfere() {
        let h1 = [c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = [c(0.0, 0.0), c(0.0, 2.0)];
        let f = rzf_columns(&[&h1, &h2], 1.0).unwrap();
        let f0 = f.column(0);
        let f1 = f.column(1);
        assert!(dot_t(&h2, &f0).norm() / dot_t(&h2, &f1).norm() < 1e-10);
        assert!(dot_t(&h1, &f1).norm() / dot_t(&h1, &f0).norm() < 1e-10);
        assert_eq!(
            rzf_columns(&[&[c(0., 0.)][..]], 1.0),
            Err(Error::ZeroChannel)
        );
    }

    fn channel(
        dirs: &[(Direction, Complex64)],
        ofdm: &OfdmConfig,
        arr: &ArrayConfig,
    ) -> FrequencyResponse {
        let paths = dirs
            .iter()
            .map(|&(direction, gain)| PathComponent {
                gain,
                delay: 1.5 * ofdm.sample_period,
                direction,
            })
            .collect();
        let ue = UeChannel::new(0, vec![RayCluster::new(paths).unwrap()]).unwrap();
        frequency_response(&ue, ofdm, arr).unwrap()
    }

    #[test]
    fn estimation_noise_levels() {
        let arr = ArrayConfig::new(4, 2).unwrap();
        let ofdm = OfdmConfig::new(8, 120e3, 4);
        let h = channel(&[(deg(20.0, 50.0), c(1.0, -0.5))], &ofdm, &arr);
        let f = RfPrecoder::from_directions(&[deg(20.0, 50.0)], &arr);
        let link = LinkConfig::new(1.0, 1e-3, 1).unwrap();
        let exact = estimate_effective_channels(
            std::slice::from_ref(&h),
            &f,
            &link,
            EstimationNoise::Noiseless,
            1,
        )
        .unwrap();
        assert_eq!(exact.get(0, 3), &f.effective_channel(h.vectorized(3))[..]);
        let inf = estimate_effective_channels(
            std::slice::from_ref(&h),
            &f,
            &link,
            EstimationNoise::SnrDb(f64::INFINITY),
            1,
        )
        .unwrap();
        assert_eq!(
            inf,
            EffectiveChannelEstimate {
                noise: EstimationNoise::SnrDb(f64::INFINITY),
                ..exact.clone()
            }
        );
        let a = estimate_effective_channels(
            std::slice::from_ref(&h),
            &f,
            &link,
            EstimationNoise::SnrDb(0.0),
            9,
        )
        .unwrap();
        let b = estimate_effective_channels(
            std::slice::from_ref(&h),
            &f,
            &link,
            EstimationNoise::SnrDb(0.0),
            9,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_ne!(a.get(0, 0), exact.get(0, 0));
    }

    #[test]
    fn beam_prediction_picks_on_grid_path() {
        let arr = ArrayConfig::new(4, 4).unwrap();
        let ofdm = OfdmConfig::new(8, 120e3, 4);
        let book = crate::array::dft_codebook(&arr, 1).unwrap();
        let target = book
            .iter()
            .position(|cw| cw.omega_x == 0.5 && cw.omega_y == -0.5)
            .unwrap();
        let h = channel(&[(book[target].direction, c(0.7, 0.1))], &ofdm, &arr);
        assert_eq!(best_codeword(&h, &book).unwrap(), target);
        assert_eq!(best_codeword(&h.scaled(1e-4), &book).unwrap(), target);
        // Coherent gain n_x n_y over a single element of the array response.
        let a = crate::array::array_response(&book[target].direction, &arr);
        let g = dot_t(&crate::linalg::vectorize(a.matrix()), &book[target].weights).norm_sqr();
        assert!((g / a.matrix()[(0, 0)].norm_sqr() - 16.0).abs() < 1e-10);
        let link = LinkConfig::new(1.0, 1e-9, 2).unwrap();
        let (f_rf, _) = beam_prediction_baseline(
            &[h.clone(), h],
            &book,
            &link,
            EstimationNoise::SnrDb(20.0),
            3,
        )
        .unwrap();
        assert_eq!(f_rf.columns()[0], f_rf.columns()[1]);
    }
}
