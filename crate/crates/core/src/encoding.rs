//! AoD-list encodings over a quantized angle grid, the channel similarity
//! built on them, the training losses and the AoD evaluation metrics.
//!
//! Soft encoding: with perturbation range `delta`, cell `q` of the grid gets
//!
//! ```text
//! y~[q] = max(0, 1 - min_{l, (theta, phi) in q} max(|theta - theta_l| / (delta/2), |phi - phi_l| / (delta/2)))
//! ```
//!
//! where the inner minimum runs over every direction inside cell `q`, i.e.
//! the distance is measured from each path to the nearest point of the cell.
//! Azimuth differences wrap with period `2 pi`; elevation differences do not.
//! Cells that contain a path therefore always score exactly 1.

use alloc::vec;
use alloc::vec::Vec;

use crate::array::{wrap_azimuth, Direction};
use crate::beamspace::AodList;
#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::math::{PI, TAU};
use crate::{Error, Result};

/// Dimension of the fusion features fed to the soft-contrastive loss.
pub const FUSION_FEATURE_DIM: usize = 512;

/// Clamp applied to predicted probabilities inside the BCE logarithms.
pub const BCE_EPSILON: f64 = 1e-12;

/// Uniform azimuth x elevation quantizer, `theta_bins x phi_bins` cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncodingGrid {
    pub theta_bins: usize,
    pub phi_bins: usize,
}

impl Default for EncodingGrid {
    fn default() -> Self {
        Self {
            theta_bins: 90,
            phi_bins: 45,
        }
    }
}

impl EncodingGrid {
    pub fn new(theta_bins: usize, phi_bins: usize) -> Result<Self> {
        if theta_bins == 0 || phi_bins == 0 {
            return Err(Error::InvalidConfig(
                "encoding grid sizes must be positive".into(),
            ));
        }
        Ok(Self {
            theta_bins,
            phi_bins,
        })
    }

    pub fn len(&self) -> usize {
        self.theta_bins * self.phi_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta_width(&self) -> f64 {
        TAU / self.theta_bins as f64
    }

    pub fn phi_width(&self) -> f64 {
        PI / self.phi_bins as f64
    }

    /// `Q(theta, phi)`.
    pub fn quantize(&self, d: &Direction) -> (usize, usize) {
        let a = ((d.azimuth() + PI) / self.theta_width()).floor() as usize;
        let b = (d.elevation() / self.phi_width()).floor() as usize;
        (a.min(self.theta_bins - 1), b.min(self.phi_bins - 1))
    }

    pub fn index(&self, a: usize, b: usize) -> usize {
        a * self.phi_bins + b
    }

    pub fn cell_center(&self, a: usize, b: usize) -> Direction {
        Direction::clamped(
            -PI + (a as f64 + 0.5) * self.theta_width(),
            (b as f64 + 0.5) * self.phi_width(),
        )
    }

    /// Wrapped azimuth distance from `theta` to the closure of column `a`.
    fn theta_distance(&self, a: usize, theta: f64) -> f64 {
        let w = self.theta_width();
        let lo = -PI + a as f64 * w;
        // Forward offset from `lo` in [0, 2 pi); the cell covers [0, w].
        let mut off = wrap_azimuth(theta - lo);
        if off < 0.0 {
            off += TAU;
        }
        if off <= w {
            0.0
        } else {
            (off - w).min(TAU - off)
        }
    }

    /// Elevation distance from `phi` to the closure of row `b`.
    fn phi_distance(&self, b: usize, phi: f64) -> f64 {
        let w = self.phi_width();
        let lo = b as f64 * w;
        let hi = lo + w;
        if phi < lo {
            lo - phi
        } else if phi > hi {
            phi - hi
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardEncoding {
    grid: EncodingGrid,
    values: Vec<bool>,
}

impl HardEncoding {
    pub fn from_values(grid: EncodingGrid, values: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(
                "hard encoding size differs from grid".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &EncodingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn get(&self, a: usize, b: usize) -> bool {
        self.values[self.grid.index(a, b)]
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&v| if v { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftEncoding {
    grid: EncodingGrid,
    values: Vec<f64>,
    /// Perturbation range, radians.
    delta: f64,
}

impl SoftEncoding {
    pub fn grid(&self) -> &EncodingGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[self.grid.index(a, b)]
    }

    /// Same encoding with every value multiplied by `factor`; only useful for
    /// probing the scale invariance of [`similarity`].
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

pub fn hard_encode(aods: &AodList, grid: &EncodingGrid) -> HardEncoding {
    let mut values = vec![false; grid.len()];
    for d in aods.directions() {
        let (a, b) = grid.quantize(d);
        values[grid.index(a, b)] = true;
    }
    HardEncoding {
        grid: *grid,
        values,
    }
}

/// `delta` is the full perturbation range in radians (10 degrees by default
/// in the experiments).
pub fn soft_encode(aods: &AodList, grid: &EncodingGrid, delta: f64) -> Result<SoftEncoding> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig(
            "soft-encoding delta must be positive".into(),
        ));
    }
    let half = delta / 2.0;
    let paths: Vec<Direction> = aods.directions().copied().collect();
    let mut values = vec![0.0; grid.len()];
    if !paths.is_empty() {
        // Per-path axis distances, reused across the grid.
        let dt: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| {
                (0..grid.theta_bins)
                    .map(|a| grid.theta_distance(a, p.azimuth()))
                    .collect()
            })
            .collect();
        let dp: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| {
                (0..grid.phi_bins)
                    .map(|b| grid.phi_distance(b, p.elevation()))
                    .collect()
            })
            .collect();
        for a in 0..grid.theta_bins {
            for b in 0..grid.phi_bins {
                let nearest = (0..paths.len())
                    .map(|l| dt[l][a].max(dp[l][b]))
                    .fold(f64::INFINITY, f64::min);
                values[grid.index(a, b)] = (1.0 - nearest / half).max(0.0);
            }
        }
    }
    Ok(SoftEncoding {
        grid: *grid,
        values,
        delta,
    })
}

/// Cosine similarity of two flattened nonnegative encodings.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch("encodings differ in length".into()));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroEncoding);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok(dot / (na * nb))
}

/// Channel similarity `rho = a^T b / (|a| |b|)`.
pub fn similarity(a: &SoftEncoding, b: &SoftEncoding) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    cosine_similarity(&a.values, &b.values)
}

/// Per-cell predicted probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionGrid {
    grid: EncodingGrid,
    probabilities: Vec<f64>,
}

impl PredictionGrid {
    pub fn new(grid: EncodingGrid, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.len() != grid.len() {
            return Err(Error::ShapeMismatch(
                "prediction size differs from grid".into(),
            ));
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            grid,
            probabilities,
        })
    }

    pub fn grid(&self) -> &EncodingGrid {
        &self.grid
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// Mean over the batch of the summed per-cell binary cross entropy.
pub fn bce_loss(pred: &[PredictionGrid], truth: &[HardEncoding]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(
            "prediction and truth batches differ".into(),
        ));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    let mut total = 0.0;
    for (p, y) in pred.iter().zip(truth) {
        if p.grid != y.grid {
            return Err(Error::GridMismatch);
        }
        total += p
            .probabilities
            .iter()
            .zip(&y.values)
            .map(|(&q, &t)| {
                let q = q.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
                if t {
                    q.ln()
                } else {
                    (1.0 - q).ln()
                }
            })
            .sum::<f64>();
    }
    Ok(-total / pred.len() as f64)
}

/// Fusion feature vector of length [`FUSION_FEATURE_DIM`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() != FUSION_FEATURE_DIM {
            return Err(Error::ShapeMismatch(alloc::format!(
                "feature vector of length {} (expected {FUSION_FEATURE_DIM})",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(1/B^2) sum_{i,j} (1 - 2 rho_ij) exp(c_ij)` over row-major `B x B`
/// matrices of feature cosines `c` and channel similarities `rho`.
pub fn sscl_from_matrices(cosines: &[f64], similarities: &[f64], batch: usize) -> Result<f64> {
    if cosines.len() != batch * batch || similarities.len() != batch * batch {
        return Err(Error::ShapeMismatch("SSCL matrices must be B x B".into()));
    }
    if batch == 0 {
        return Err(Error::EmptyInput("empty batch"));
    }
    let sum: f64 = cosines
        .iter()
        .zip(similarities)
        .map(|(&c, &rho)| (1.0 - 2.0 * rho) * c.exp())
        .sum();
    Ok(sum / (batch * batch) as f64)
}

/// Supervised soft-contrastive loss over all ordered pairs, diagonal
/// included.
pub fn sscl_loss(features: &[FeatureVector], soft: &[SoftEncoding]) -> Result<f64> {
    let n = features.len();
    if soft.len() != n {
        return Err(Error::ShapeMismatch(
            "feature and encoding batches differ".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyInput("empty batch"));
    }
    let norms: Vec<f64> = features.iter().map(FeatureVector::norm).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroFeature);
    }
    let mut cos = vec![0.0; n * n];
    let mut rho = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = features[i]
                .0
                .iter()
                .zip(&features[j].0)
                .map(|(a, b)| a * b)
                .sum();
            let c = dot / (norms[i] * norms[j]);
            let r = similarity(&soft[i], &soft[j])?;
            cos[i * n + j] = c;
            cos[j * n + i] = c;
            rho[i * n + j] = r;
            rho[j * n + i] = r;
        }
    }
    sscl_from_matrices(&cos, &rho, n)
}

/// Every cell with probability strictly above 0.5 becomes one direction at
/// the cell center, all in a single cluster.
pub fn decode_predictions(pred: &PredictionGrid) -> AodList {
    let g = pred.grid;
    let dirs = pred
        .probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.5)
        .map(|(idx, _)| g.cell_center(idx / g.phi_bins, idx % g.phi_bins))
        .collect();
    AodList::single_cluster(dirs)
}

fn nearest<'a>(d: &Direction, truth: &'a [Direction]) -> (&'a Direction, f64) {
    truth
        .iter()
        .map(|t| (t, d.angle_to(t)))
        .fold((&truth[0], f64::INFINITY), |best, cur| {
            if cur.1 < best.1 {
                cur
            } else {
                best
            }
        })
}

fn paired_metric(
    pred: &AodList,
    truth: &AodList,
    dist: impl Fn(&Direction, &Direction, f64) -> f64,
) -> Result<f64> {
    let truth: Vec<Direction> = truth.directions().copied().collect();
    if truth.is_empty() {
        return Err(Error::EmptyInput("ground-truth AoD-list"));
    }
    let n = pred.num_paths();
    if n == 0 {
        return Err(Error::EmptyInput("predicted AoD-list"));
    }
    let total: f64 = pred
        .directions()
        .map(|d| {
            let (t, ang) = nearest(d, &truth);
            dist(d, t, ang)
        })
        .sum();
    Ok(total / n as f64)
}

/// Mean angular distance (degrees) from each predicted direction to its
/// nearest ground-truth direction.
pub fn mad_metric(pred: &AodList, truth: &AodList) -> Result<f64> {
    paired_metric(pred, truth, |_, _, ang| ang.to_degrees())
}

/// `(sin theta, cos theta, sin phi)`.
pub fn cosine_triplet(d: &Direction) -> [f64; 3] {
    [d.azimuth().sin(), d.azimuth().cos(), d.elevation().sin()]
}

/// Mean L1 distance between cosine triplets, paired by nearest angle as in
/// [`mad_metric`].
pub fn mae_cosines(pred: &AodList, truth: &AodList) -> Result<f64> {
    paired_metric(pred, truth, |p, t, _| {
        let (a, b) = (cosine_triplet(p), cosine_triplet(t));
        (a[0] - b[0]).abs() + (a[1] - b[1]).abs() + (a[2] - b[2]).abs()
    })
}

fn batch_mean(
    pairs: &[(AodList, AodList)],
    f: fn(&AodList, &AodList) -> Result<f64>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("empty batch"));
    }
    let mut sum = 0.0;
    for (p, t) in pairs {
        sum += f(p, t)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Average of sample-wise MADs over `(prediction, truth)` pairs.
pub fn mad_batch(pairs: &[(AodList, AodList)]) -> Result<f64> {
    batch_mean(pairs, mad_metric)
}

pub fn mae_cosines_batch(pairs: &[(AodList, AodList)]) -> Result<f64> {
    batch_mean(pairs, mae_cosines)
}

/// Quantizer over `(sin theta, cos theta, sin phi)`. The two azimuth axes
/// span `[-1, 1]`; the elevation axis spans `[0, 1]` (the range of `sin phi`
/// on `[0, pi]`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CosineGrid {
    pub bins: [usize; 3],
}

impl Default for CosineGrid {
    fn default() -> Self {
        Self { bins: [40, 40, 40] }
    }
}

const COSINE_AXES: [(f64, f64); 3] = [(-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)];

impl CosineGrid {
    pub fn len(&self) -> usize {
        self.bins.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn width(&self, axis: usize) -> f64 {
        let (lo, hi) = COSINE_AXES[axis];
        (hi - lo) / self.bins[axis] as f64
    }

    pub fn quantize(&self, d: &Direction) -> [usize; 3] {
        let t = cosine_triplet(d);
        let mut out = [0; 3];
        for axis in 0..3 {
            let lo = COSINE_AXES[axis].0;
            let idx = ((t[axis] - lo) / self.width(axis)).floor().max(0.0) as usize;
            out[axis] = idx.min(self.bins[axis] - 1);
        }
        out
    }

    pub fn index(&self, cell: [usize; 3]) -> usize {
        (cell[0] * self.bins[1] + cell[1]) * self.bins[2] + cell[2]
    }

    fn axis_distance(&self, axis: usize, bin: usize, v: f64) -> f64 {
        let lo = COSINE_AXES[axis].0 + bin as f64 * self.width(axis);
        let hi = lo + self.width(axis);
        if v < lo {
            lo - v
        } else if v > hi {
            v - hi
        } else {
            0.0
        }
    }
}

/// Hard (`range == None`) or soft encoding over a [`CosineGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct CosineEncoding {
    grid: CosineGrid,
    values: Vec<f64>,
    range: Option<f64>,
}

impl CosineEncoding {
    pub fn grid(&self) -> &CosineGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Soft perturbation range in triplet units, `None` for hard encodings.
    pub fn range(&self) -> Option<f64> {
        self.range
    }

    pub fn get(&self, cell: [usize; 3]) -> f64 {
        self.values[self.grid.index(cell)]
    }
}

pub fn cosine_hard_encode(aods: &AodList, grid: &CosineGrid) -> CosineEncoding {
    let mut values = vec![0.0; grid.len()];
    for d in aods.directions() {
        values[grid.index(grid.quantize(d))] = 1.0;
    }
    CosineEncoding {
        grid: *grid,
        values,
        range: None,
    }
}

/// Soft cosine encoding: the angle-based linear-decay rule applied per
/// triplet axis with full range `range` (no wrapping on any axis).
pub fn cosine_soft_encode(aods: &AodList, grid: &CosineGrid, range: f64) -> Result<CosineEncoding> {
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::InvalidConfig(
            "cosine soft-encoding range must be positive".into(),
        ));
    }
    let half = range / 2.0;
    let triplets: Vec<[f64; 3]> = aods.directions().map(cosine_triplet).collect();
    let mut values = vec![0.0; grid.len()];
    if !triplets.is_empty() {
        let dist: Vec<[Vec<f64>; 3]> = triplets
            .iter()
            .map(|t| {
                core::array::from_fn(|axis| {
                    (0..grid.bins[axis])
                        .map(|b| grid.axis_distance(axis, b, t[axis]))
                        .collect()
                })
            })
            .collect();
        for i in 0..grid.bins[0] {
            for j in 0..grid.bins[1] {
                for k in 0..grid.bins[2] {
                    let nearest = dist
                        .iter()
                        .map(|d| d[0][i].max(d[1][j]).max(d[2][k]))
                        .fold(f64::INFINITY, f64::min);
                    values[grid.index([i, j, k])] = (1.0 - nearest / half).max(0.0);
                }
            }
        }
    }
    Ok(CosineEncoding {
        grid: *grid,
        values,
        range: Some(range),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::E;

    fn deg(a: f64, e: f64) -> Direction {
        Direction::from_degrees(a, e).unwrap()
    }

    fn g() -> EncodingGrid {
        EncodingGrid::default()
    }

    #[test]
    fn hard_encoding_basics() {
        let grid = g();
        let center = grid.cell_center(10, 20);
        let h = hard_encode(&AodList::single_cluster(vec![center]), &grid);
        assert_eq!(h.count_ones(), 1);
        assert!(h.get(10, 20));
        // Two paths inside one 4x4 degree bin.
        let h = hard_encode(
            &AodList::new(vec![vec![deg(1.0, 41.0)], vec![deg(2.5, 42.0)]]),
            &grid,
        );
        assert_eq!(h.count_ones(), 1);
        assert_eq!(hard_encode(&AodList::default(), &grid).count_ones(), 0);
    }

    #[test]
    fn soft_encoding_arithmetic() {
        let grid = g();
        let delta = 10f64.to_radians();
        // Path 2.5 degrees into azimuth column 46, elevation inside row 20.
        let p = deg(-180.0 + 46.0 * 4.0 + 2.5, 82.0);
        assert_eq!(grid.quantize(&p), (46, 20));
        let s = soft_encode(&AodList::single_cluster(vec![p]), &grid, delta).unwrap();
        assert_eq!(s.get(46, 20), 1.0);
        assert!((s.get(45, 20) - 0.5).abs() < 1e-12);
        // Neighbour on the other side is 1.5 degrees away.
        assert!((s.get(47, 20) - (1.0 - 1.5 / 5.0)).abs() < 1e-12);
        // Exactly delta/2 away on the azimuth axis: zero.
        let q = deg(-180.0 + 50.0 * 4.0 + 1.0, 82.0);
        let s = soft_encode(&AodList::single_cluster(vec![q]), &grid, delta).unwrap();
        assert!(s.get(48, 20).abs() < 1e-12);
        assert!(soft_encode(&AodList::default(), &grid, 0.0).is_err());
    }

    #[test]
    fn soft_encoding_wraps_azimuth() {
        let grid = g();
        let p = deg(-179.0, 90.0);
        let s = soft_encode(&AodList::single_cluster(vec![p]), &grid, 10f64.to_radians()).unwrap();
        // Last column ends at +180 = -180, one degree away.
        assert!((s.get(89, 22) - (1.0 - 1.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn similarity_basics() {
        let grid = g();
        let d = 10f64.to_radians();
        let a = soft_encode(&AodList::single_cluster(vec![deg(10.0, 60.0)]), &grid, d).unwrap();
        let b = soft_encode(&AodList::single_cluster(vec![deg(-90.0, 60.0)]), &grid, d).unwrap();
        assert!((similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(similarity(&a, &b).unwrap(), 0.0);
        let z = soft_encode(&AodList::default(), &grid, d).unwrap();
        assert_eq!(similarity(&a, &z), Err(Error::ZeroEncoding));
        assert!((similarity(&a.scaled(3.0), &b.scaled(0.1)).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bce_closed_forms() {
        let grid = EncodingGrid::new(6, 3).unwrap();
        let truth = hard_encode(
            &AodList::single_cluster(vec![grid.cell_center(2, 1)]),
            &grid,
        );
        let exact = PredictionGrid::new(grid, truth.to_f64()).unwrap();
        let l = bce_loss(&[exact], std::slice::from_ref(&truth)).unwrap();
        assert!((0.0..18.0 * 1e-11).contains(&l));
        let half = PredictionGrid::new(grid, vec![0.5; 18]).unwrap();
        let l1 = bce_loss(std::slice::from_ref(&half), std::slice::from_ref(&truth)).unwrap();
        assert!((l1 - 18.0 * 2f64.ln()).abs() < 1e-12);
        let l2 = bce_loss(
            &[half.clone(), half.clone()],
            &[truth.clone(), truth.clone()],
        )
        .unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        assert!(bce_loss(&[half], &[]).is_err());
    }

    fn basis(i: usize) -> FeatureVector {
        let mut v = vec![0.0; FUSION_FEATURE_DIM];
        v[i] = 1.0;
        FeatureVector::new(v).unwrap()
    }

    #[test]
    fn sscl_closed_forms() {
        let grid = g();
        let d = 10f64.to_radians();
        let a = soft_encode(&AodList::single_cluster(vec![deg(10.0, 60.0)]), &grid, d).unwrap();
        let b = soft_encode(&AodList::single_cluster(vec![deg(-90.0, 60.0)]), &grid, d).unwrap();
        let same = sscl_loss(&[basis(0), basis(0)], &[a.clone(), a.clone()]).unwrap();
        assert!((same + E).abs() < 1e-12);
        let apart = sscl_loss(&[basis(0), basis(1)], &[a.clone(), b.clone()]).unwrap();
        assert!((apart - (1.0 - E) / 2.0).abs() < 1e-12);
        let swapped = sscl_loss(&[basis(1), basis(0)], &[b, a]).unwrap();
        assert!((apart - swapped).abs() < 1e-15);
    }

    #[test]
    fn sscl_rejects_zero_feature() {
        let grid = g();
        let a = soft_encode(&AodList::single_cluster(vec![deg(0.0, 30.0)]), &grid, 0.2).unwrap();
        let zero = FeatureVector::new(vec![0.0; FUSION_FEATURE_DIM]).unwrap();
        assert_eq!(sscl_loss(&[zero], &[a]), Err(Error::ZeroFeature));
        assert!(FeatureVector::new(vec![1.0; 3]).is_err());
    }

    #[test]
    fn decode_threshold_is_strict() {
        let grid = EncodingGrid::new(4, 2).unwrap();
        let mut p = vec![0.5; 8];
        assert!(decode_predictions(&PredictionGrid::new(grid, p.clone()).unwrap()).is_empty());
        p[grid.index(3, 1)] = 0.9;
        let aods = decode_predictions(&PredictionGrid::new(grid, p).unwrap());
        assert_eq!(aods.num_paths(), 1);
        assert_eq!(*aods.directions().next().unwrap(), grid.cell_center(3, 1));
        assert!(PredictionGrid::new(grid, vec![1.5; 8]).is_err());
    }

    #[test]
    fn mad_and_mae_examples() {
        let truth = AodList::single_cluster(vec![deg(0.0, 90.0)]);
        assert_eq!(mad_metric(&truth, &truth).unwrap(), 0.0);
        let p = AodList::single_cluster(vec![deg(10.0, 90.0)]);
        assert!((mad_metric(&p, &truth).unwrap() - 10.0).abs() < 1e-12);
        let p = AodList::single_cluster(vec![deg(90.0, 90.0)]);
        assert!((mae_cosines(&p, &truth).unwrap() - 2.0).abs() < 1e-12);
        assert!((mae_cosines(&truth, &p).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(mae_cosines(&truth, &truth).unwrap(), 0.0);
        // Nearest of two truths.
        let two = AodList::new(vec![vec![deg(0.0, 90.0)], vec![deg(40.0, 90.0)]]);
        let p = AodList::single_cluster(vec![deg(35.0, 90.0)]);
        assert!((mad_metric(&p, &two).unwrap() - 5.0).abs() < 1e-12);
        assert!(mad_metric(&AodList::default(), &two).is_err());
        assert!(mad_metric(&two, &AodList::default()).is_err());
    }

    #[test]
    fn cosine_encodings() {
        let grid = CosineGrid::default();
        let d = deg(30.0, 60.0);
        let aods = AodList::single_cluster(vec![d]);
        let h = cosine_hard_encode(&aods, &grid);
        let cell = grid.quantize(&d);
        assert_eq!(h.get(cell), 1.0);
        assert_eq!(h.values().iter().filter(|&&v| v == 1.0).count(), 1);
        let s = cosine_soft_encode(&aods, &grid, 0.125).unwrap();
        assert_eq!(s.get(cell), 1.0);
        assert!(s.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(s.values().iter().filter(|&&v| v > 0.0).count() > 1);
        // Hard cells are exactly the soft cells at 1.
        for (hv, sv) in h.values().iter().zip(s.values()) {
            assert_eq!(*hv == 1.0, *sv == 1.0);
        }
    }
}
