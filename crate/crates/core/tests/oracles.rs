//! Independent re-implementations checked against the library.

use beamspace_core::array::{ArrayConfig, Direction};
use beamspace_core::beamspace::{compute_beamspace, peak_cell, AngleGrid, AodList};
use beamspace_core::channel::FrequencyResponse;
use beamspace_core::evaluation::{perturb_beamspace_estimate, user_se, EstimatorErrorModel};
use beamspace_core::linalg::CMatrix;
use beamspace_core::precoding::{rzf_columns, DigitalPrecoder, LinkConfig, RfPrecoder};
use beamspace_core::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cgauss(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
}

fn random_direction(rng: &mut impl Rng) -> Direction {
    Direction::new(rng.random_range(-3.1..3.1), rng.random_range(0.0..3.1)).unwrap()
}

/// SE of user `u` with every product written out as explicit sums over
/// antennas and RF chains.
fn scalar_se(
    h: &[Vec<Complex64>],
    f_rf: &[Vec<Complex64>],
    f_bb: &[Vec<Vec<Complex64>>],
    p: f64,
    sigma2: f64,
    u: usize,
) -> f64 {
    let k_count = h.len();
    let n_ant = h[0].len();
    let n_rf = f_rf.len();
    let n_s = f_bb[0][0].len();
    let mut total = 0.0;
    for k in 0..k_count {
        let mut g = vec![0.0; n_s];
        for (v, gv) in g.iter_mut().enumerate() {
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..n_ant {
                for r in 0..n_rf {
                    s += h[k][n] * f_rf[r][n] * f_bb[k][r][v];
                }
            }
            *gv = s.re * s.re + s.im * s.im;
        }
        let interf: f64 = g
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != u)
            .map(|(_, x)| x)
            .sum();
        let sinr = (p / n_s as f64) * g[u] / (sigma2 + (p / n_s as f64) * interf);
        total += (1.0 + sinr).ln() / std::f64::consts::LN_2;
    }
    total / k_count as f64
}

#[test]
fn user_se_matches_scalar_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let arr = ArrayConfig::new(2, 2).unwrap();
    for _ in 0..100 {
        let (k_count, n_s) = (4, 2);
        let h: Vec<Vec<Complex64>> = (0..k_count)
            .map(|_| (0..4).map(|_| cgauss(&mut rng)).collect())
            .collect();
        let dirs = [random_direction(&mut rng), random_direction(&mut rng)];
        let f_rf = RfPrecoder::from_directions(&dirs, &arr);
        // f_bb[k][r][v]
        let f_bb: Vec<Vec<Vec<Complex64>>> = (0..k_count)
            .map(|_| {
                (0..2)
                    .map(|_| (0..n_s).map(|_| cgauss(&mut rng)).collect())
                    .collect()
            })
            .collect();
        let p = rng.random_range(0.1..10.0);
        let sigma2 = rng.random_range(0.01..1.0);

        let chan = FrequencyResponse::from_matrices(
            h.iter()
                .map(|v| CMatrix::from_row_major(2, 2, v.clone()).unwrap())
                .collect(),
        )
        .unwrap();
        let bb = DigitalPrecoder::from_matrices(
            f_bb.iter()
                .map(|m| {
                    CMatrix::from_row_major(2, n_s, m.iter().flatten().copied().collect()).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let link = LinkConfig::new(p, sigma2, n_s).unwrap();
        for u in 0..n_s {
            let lib = user_se(&chan, Some(&f_rf), &bb, &link, u).unwrap();
            let oracle = scalar_se(&h, f_rf.columns(), &f_bb, p, sigma2, u);
            assert!((lib - oracle).abs() < 1e-12, "{lib} vs {oracle}");
        }
    }
}

#[test]
fn rzf_matches_direct_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let n = rng.random_range(2..7usize);
        let u = rng.random_range(1..=n);
        let r = [1.0, 0.1, 1e-3][trial % 3];
        let rows: Vec<Vec<Complex64>> = (0..u)
            .map(|_| (0..n).map(|_| cgauss(&mut rng)).collect())
            .collect();
        let lib = rzf_columns(&rows.iter().map(Vec::as_slice).collect::<Vec<_>>(), r).unwrap();

        // (H^H H + r I)^{-1} H^H with the N x N inverse.
        let h = DMatrix::from_fn(u, n, |i, j| {
            nalgebra::Complex::new(rows[i][j].re, rows[i][j].im)
        });
        let hh = h.adjoint();
        let a = &hh * &h
            + DMatrix::<nalgebra::Complex<f64>>::identity(n, n) * nalgebra::Complex::new(r, 0.0);
        let f = a.try_inverse().unwrap() * hh;
        for col in 0..u {
            let c = f.column(col);
            let nrm = c.norm();
            for i in 0..n {
                let want = c[i] / nrm;
                let got = lib[(i, col)];
                assert!((want.re - got.re).abs() < 1e-9 && (want.im - got.im).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn single_path_peak_is_exact_on_grid_only() {
    let grid = AngleGrid::new(64, 32).unwrap();
    let arr = ArrayConfig::new(16, 8).unwrap();
    for (i, j) in [(40, 16), (7, 3), (63, 20)] {
        let b = compute_beamspace(
            &AodList::single_cluster(vec![grid.direction(i, j)]),
            &grid,
            &arr,
        );
        assert!((b.max() - 1.0).abs() < 1e-9);
        assert!((b.get(i, j) - 1.0).abs() < 1e-9);
    }
    let off = Direction::new(
        grid.theta(40) + 0.5 * (grid.theta(41) - grid.theta(40)),
        1.2,
    )
    .unwrap();
    let b = compute_beamspace(&AodList::single_cluster(vec![off]), &grid, &arr);
    assert!(b.max() < 1.0 - 1e-6);
    peak_cell(&b).unwrap();
}

/// With i.i.d. N(0, s^2) offsets on both axes at the equator, the angular
/// error is Rayleigh with mean `s * sqrt(pi / 2)`.
#[test]
fn perturbation_mean_error_is_rayleigh() {
    let s = 6.1f64.to_radians();
    let truth = AodList::single_cluster(vec![
        Direction::new(0.3, std::f64::consts::FRAC_PI_2)
            .unwrap();
        20
    ]);
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..200 {
        let est =
            perturb_beamspace_estimate(&truth, &EstimatorErrorModel::angular(s, seed)).unwrap();
        for (a, b) in truth.directions().zip(est.directions()) {
            total += a.angle_to(b);
            count += 1.0;
        }
    }
    let mean = (total / count).to_degrees();
    let want = 6.1 * (std::f64::consts::PI / 2.0).sqrt();
    assert!((mean - want).abs() / want < 0.03, "{mean} vs {want}");
}
