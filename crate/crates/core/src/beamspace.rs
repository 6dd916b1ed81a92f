//! AoD-lists and the gain-agnostic beamspace grid.
//!
//! For a grid direction `g = (theta_i, phi_j)` the beamspace value is
//!
//! ```text
//! G(i, j) = sum_c | (1/L_c) sum_l a_y(g)^H A(path_{c,l}) conj(a_x(g)) |^2
//! ```
//!
//! Every path carries unit gain, so the value depends only on directions.
//! Because `A = a_y a_x^T`, each term factors into
//! `(a_y(g)^H a_y(p)) * (a_x(g)^H a_x(p))`, which is what is evaluated.

use alloc::vec;
use alloc::vec::Vec;

use crate::array::{ArrayConfig, Direction};
use crate::channel::UeChannel;
use crate::math::{PI, TAU};
use crate::{Complex64, Error, Result};

/// `theta_i = 2 pi i / g_theta - pi`, `phi_j = pi j / g_phi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngleGrid {
    pub g_theta: usize,
    pub g_phi: usize,
}

impl AngleGrid {
    pub fn new(g_theta: usize, g_phi: usize) -> Result<Self> {
        if g_theta == 0 || g_phi == 0 {
            return Err(Error::InvalidConfig(
                "angle grid sizes must be positive".into(),
            ));
        }
        Ok(Self { g_theta, g_phi })
    }

    pub fn theta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.g_theta as f64 - PI
    }

    pub fn phi(&self, j: usize) -> f64 {
        PI * j as f64 / self.g_phi as f64
    }

    pub fn direction(&self, i: usize, j: usize) -> Direction {
        Direction::clamped(self.theta(i), self.phi(j))
    }

    pub fn len(&self) -> usize {
        self.g_theta * self.g_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major cell index.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.g_phi + j
    }

    pub fn cell(&self, index: usize) -> (usize, usize) {
        (index / self.g_phi, index % self.g_phi)
    }
}

/// Path directions grouped by ray cluster. May be empty (e.g. after every
/// path of an estimate was missed).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AodList {
    clusters: Vec<Vec<Direction>>,
}

impl AodList {
    /// Empty clusters are dropped.
    pub fn new(clusters: Vec<Vec<Direction>>) -> Self {
        Self {
            clusters: clusters.into_iter().filter(|c| !c.is_empty()).collect(),
        }
    }

    pub fn single_cluster(dirs: Vec<Direction>) -> Self {
        Self::new(vec![dirs])
    }

    /// All paths of a channel, cluster structure preserved.
    pub fn from_channel(ch: &UeChannel) -> Self {
        Self::new(
            ch.clusters()
                .iter()
                .map(|c| c.paths().iter().map(|p| p.direction).collect())
                .collect(),
        )
    }

    pub fn clusters(&self) -> &[Vec<Direction>] {
        &self.clusters
    }

    pub fn num_paths(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn directions(&self) -> impl Iterator<Item = &Direction> {
        self.clusters.iter().flatten()
    }

    /// Concatenation of the cluster lists.
    pub fn union(&self, other: &AodList) -> AodList {
        let mut clusters = self.clusters.clone();
        clusters.extend(other.clusters.iter().cloned());
        AodList { clusters }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TruncationMode {
    /// Keep the `budget` strongest paths over all clusters combined.
    #[default]
    Global,
    /// Keep the `budget` strongest paths of every cluster.
    PerCluster,
}

/// Keeps the strongest paths by `|gain|`, preserving cluster grouping and
/// the original order within each cluster. Equal magnitudes keep the earlier
/// path. Clusters left empty are dropped.
pub fn truncate_paths(ch: &UeChannel, budget: usize, mode: TruncationMode) -> AodList {
    let mut keep: Vec<Vec<bool>> = ch
        .clusters()
        .iter()
        .map(|c| vec![false; c.paths().len()])
        .collect();
    match mode {
        TruncationMode::Global => {
            let mut all: Vec<(usize, usize, f64)> = ch
                .clusters()
                .iter()
                .enumerate()
                .flat_map(|(c, cl)| {
                    cl.paths()
                        .iter()
                        .enumerate()
                        .map(move |(l, p)| (c, l, p.gain.norm()))
                })
                .collect();
            all.sort_by(|a, b| b.2.total_cmp(&a.2));
            for &(c, l, _) in all.iter().take(budget) {
                keep[c][l] = true;
            }
        }
        TruncationMode::PerCluster => {
            for (c, cl) in ch.clusters().iter().enumerate() {
                let mut idx: Vec<(usize, f64)> = cl
                    .paths()
                    .iter()
                    .map(|p| p.gain.norm())
                    .enumerate()
                    .collect();
                idx.sort_by(|a, b| b.1.total_cmp(&a.1));
                for &(l, _) in idx.iter().take(budget) {
                    keep[c][l] = true;
                }
            }
        }
    }
    AodList::new(
        ch.clusters()
            .iter()
            .zip(&keep)
            .map(|(cl, k)| {
                cl.paths()
                    .iter()
                    .zip(k)
                    .filter(|(_, &k)| k)
                    .map(|(p, _)| p.direction)
                    .collect()
            })
            .collect(),
    )
}

/// Nonnegative `g_theta x g_phi` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Beamspace {
    grid: AngleGrid,
    values: Vec<f64>,
}

impl Beamspace {
    pub fn from_values(grid: AngleGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.g_theta,
                grid.g_phi
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite(
                "beamspace values (must be finite and >= 0)",
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// `(1/n) sum_{m<n} step^m`; with `step = exp(-j pi (omega_p - omega_g))`
/// this is `a(g)^H a(p)` for one axis.
fn axis_correlation(step: Complex64, n: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut ph = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        acc += ph;
        ph *= step;
    }
    acc / n as f64
}

fn phasor(omega: f64) -> Complex64 {
    Complex64::from_polar(1.0, -PI * omega)
}

/// `a_y(g)^H A(p) conj(a_x(g))` for directions given by their cosines.
#[cfg(test)]
pub(crate) fn projection(g: (f64, f64), p: (f64, f64), arr: &ArrayConfig) -> Complex64 {
    axis_correlation(phasor(p.0 - g.0), arr.n_x) * axis_correlation(phasor(p.1 - g.1), arr.n_y)
}

pub fn compute_beamspace(aods: &AodList, grid: &AngleGrid, arr: &ArrayConfig) -> Beamspace {
    let mut values = vec![0.0; grid.len()];
    // exp(-j pi (p - g)) = exp(-j pi p) * conj(exp(-j pi g))
    let clusters: Vec<Vec<(Complex64, Complex64)>> = aods
        .clusters()
        .iter()
        .map(|c| {
            c.iter()
                .map(|d| (phasor(d.omega_x()), phasor(d.omega_y())))
                .collect()
        })
        .collect();
    for i in 0..grid.g_theta {
        for j in 0..grid.g_phi {
            let g = grid.direction(i, j);
            let (gx, gy) = (phasor(g.omega_x()).conj(), phasor(g.omega_y()).conj());
            let mut v = 0.0;
            for paths in &clusters {
                let s: Complex64 = paths
                    .iter()
                    .map(|&(px, py)| {
                        axis_correlation(px * gx, arr.n_x) * axis_correlation(py * gy, arr.n_y)
                    })
                    .sum();
                v += (s / paths.len() as f64).norm_sqr();
            }
            values[grid.index(i, j)] = v;
        }
    }
    Beamspace {
        grid: *grid,
        values,
    }
}

/// Index of the largest value not in `excluded`; ties go to the smallest
/// index. `None` only when every cell is excluded.
pub(crate) fn argmax_excluding(values: &[f64], excluded: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, &v) in values.iter().enumerate() {
        if excluded.contains(&idx) {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((idx, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Grid cell `(i, j)` of the maximum; ties broken by smallest `i`, then `j`.
pub fn peak_cell(b: &Beamspace) -> Result<(usize, usize)> {
    let idx = argmax_excluding(&b.values, &[]).ok_or(Error::EmptyInput("empty grid"))?;
    if !(b.values[idx] > 0.0) {
        return Err(Error::DegenerateResidual);
    }
    Ok(b.grid.cell(idx))
}

pub fn peak_direction(b: &Beamspace) -> Result<Direction> {
    let (i, j) = peak_cell(b)?;
    Ok(b.grid.direction(i, j))
}
