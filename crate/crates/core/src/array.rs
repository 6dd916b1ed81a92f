//! Uniform rectangular array (half-wavelength spacing) on the XY-plane with
//! broadside along Z.
//!
//! A direction `(theta, phi)` (azimuth, elevation) enters the array response
//! only through the direction cosines `omega_x = cos(theta) sin(phi)` and
//! `omega_y = sin(theta) sin(phi)`. The response matrix is
//! `A = a_y a_x^T` with shape `n_y x n_x`, and every beam in this crate is
//! `vec(conj(A))` under the row-major `vec` of [`crate::linalg::vectorize`].

use alloc::vec::Vec;

use crate::linalg::{vectorize, CMatrix};
#[cfg(not(feature = "std"))]
use crate::math::Float;
use crate::math::{PI, TAU};
use crate::{Complex64, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArrayConfig {
    /// Elements along X.
    pub n_x: usize,
    /// Elements along Y.
    pub n_y: usize,
}

impl ArrayConfig {
    pub fn new(n_x: usize, n_y: usize) -> Result<Self> {
        let cfg = Self { n_x, n_y };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "array dimensions must be positive, got {}x{}",
                self.n_x,
                self.n_y
            )));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.n_x * self.n_y
    }
}

/// An angle of departure. Azimuth is wrapped into `[-pi, pi)`; elevation must
/// lie in `[0, pi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

pub(crate) fn wrap_azimuth(az: f64) -> f64 {
    let mut r = (az + PI) % TAU;
    if r < 0.0 {
        r += TAU;
    }
    let w = r - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() || !(0.0..=PI).contains(&elevation) {
            return Err(Error::InvalidAngle { azimuth, elevation });
        }
        Ok(Self {
            azimuth: wrap_azimuth(azimuth),
            elevation,
        })
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg.to_radians(), elevation_deg.to_radians())
    }

    /// Like [`Direction::new`] but clamps elevation into `[0, pi]`.
    pub(crate) fn clamped(azimuth: f64, elevation: f64) -> Self {
        Self {
            azimuth: wrap_azimuth(azimuth),
            elevation: elevation.clamp(0.0, PI),
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth.to_degrees()
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation.to_degrees()
    }

    pub fn omega_x(&self) -> f64 {
        self.azimuth.cos() * self.elevation.sin()
    }

    pub fn omega_y(&self) -> f64 {
        self.azimuth.sin() * self.elevation.sin()
    }

    /// `(cos theta sin phi, sin theta sin phi, cos phi)`.
    pub fn unit_vector(&self) -> [f64; 3] {
        let s = self.elevation.sin();
        [
            self.azimuth.cos() * s,
            self.azimuth.sin() * s,
            self.elevation.cos(),
        ]
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        // atan2 form of arccos(dot): exact zero for identical directions.
        cross_norm.atan2(dot)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringVector {
    entries: Vec<Complex64>,
    axis: Axis,
}

impl SteeringVector {
    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `(1/sqrt(n)) * exp(-j pi m omega)` for `m in 0..n`.
pub(crate) fn vandermonde(omega: f64, n: usize) -> Vec<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|m| Complex64::from_polar(scale, -PI * m as f64 * omega))
        .collect()
}

pub fn steering_x(dir: &Direction, n_x: usize) -> SteeringVector {
    SteeringVector {
        entries: vandermonde(dir.omega_x(), n_x),
        axis: Axis::X,
    }
}

pub fn steering_y(dir: &Direction, n_y: usize) -> SteeringVector {
    SteeringVector {
        entries: vandermonde(dir.omega_y(), n_y),
        axis: Axis::Y,
    }
}

/// `A(theta, phi) = a_y a_x^T`, shape `n_y x n_x`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayResponse {
    matrix: CMatrix,
}

impl ArrayResponse {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

fn outer(a_y: &[Complex64], a_x: &[Complex64]) -> CMatrix {
    let data = a_y
        .iter()
        .flat_map(|&y| a_x.iter().map(move |&x| y * x))
        .collect();
    CMatrix::from_row_major(a_y.len(), a_x.len(), data).expect("outer product shape")
}

pub fn array_response(dir: &Direction, cfg: &ArrayConfig) -> ArrayResponse {
    response_from_omega(dir.omega_x(), dir.omega_y(), cfg)
}

pub fn response_from_omega(omega_x: f64, omega_y: f64, cfg: &ArrayConfig) -> ArrayResponse {
    ArrayResponse {
        matrix: outer(
            &vandermonde(omega_y, cfg.n_y),
            &vandermonde(omega_x, cfg.n_x),
        ),
    }
}

/// Directional beam `vec(conj(A(dir)))`: unit norm, every entry of magnitude
/// `1/sqrt(n_x n_y)`.
pub fn beam(dir: &Direction, cfg: &ArrayConfig) -> Vec<Complex64> {
    vectorize(&array_response(dir, cfg).matrix.conj())
}

pub fn beam_from_omega(omega_x: f64, omega_y: f64, cfg: &ArrayConfig) -> Vec<Complex64> {
    vectorize(&response_from_omega(omega_x, omega_y, cfg).matrix.conj())
}

/// One DFT codebook entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Codeword {
    pub omega_x: f64,
    pub omega_y: f64,
    /// Upper-hemisphere direction with these direction cosines.
    pub direction: Direction,
    pub weights: Vec<Complex64>,
}

/// Uniform `omega` points `2a/m` for `a` in `-floor(m/2) .. m - floor(m/2)`,
/// all inside `[-1, 1)`.
fn omega_points(m: usize) -> impl Iterator<Item = f64> {
    let lo = -((m / 2) as i64);
    (0..m as i64).map(move |a| 2.0 * (lo + a) as f64 / m as f64)
}

/// Planar DFT codebook on a uniform `(omega_x, omega_y)` grid with
/// `oversampling * n` points per axis, keeping only realizable directions
/// (`omega_x^2 + omega_y^2 <= 1`).
pub fn dft_codebook(cfg: &ArrayConfig, oversampling: usize) -> Result<Vec<Codeword>> {
    cfg.validate()?;
    if oversampling == 0 {
        return Err(Error::InvalidConfig(
            "codebook oversampling must be >= 1".into(),
        ));
    }
    let mut book = Vec::new();
    for oy in omega_points(oversampling * cfg.n_y) {
        for ox in omega_points(oversampling * cfg.n_x) {
            let r2 = ox * ox + oy * oy;
            if r2 > 1.0 {
                continue;
            }
            let elevation = r2.sqrt().min(1.0).asin();
            let azimuth = oy.atan2(ox);
            book.push(Codeword {
                omega_x: ox,
                omega_y: oy,
                direction: Direction::clamped(azimuth, elevation),
                weights: beam_from_omega(ox, oy, cfg),
            });
        }
    }
    Ok(book)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot_h;
    use alloc::vec;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn azimuth_wraps_and_elevation_is_checked() {
        let d = Direction::new(PI, 0.3).unwrap();
        assert_eq!(d.azimuth(), -PI);
        let d = Direction::new(3.0 * PI + 0.25, 0.3).unwrap();
        assert!((d.azimuth() - (-PI + 0.25)).abs() < 1e-12);
        assert!(Direction::new(0.0, -0.01).is_err());
        assert!(Direction::new(0.0, PI + 1e-9).is_err());
        assert!(Direction::new(f64::NAN, 0.0).is_err());
        assert!(Direction::new(0.0, PI).is_ok());
    }

    #[test]
    fn steering_broadside_is_uniform() {
        let d = Direction::new(1.234, 0.0).unwrap();
        for v in [steering_x(&d, 4), steering_y(&d, 4)] {
            for &e in v.entries() {
                assert!(close(e, Complex64::new(0.5, 0.0), 1e-15));
            }
        }
    }

    #[test]
    fn steering_x_endfire_alternates() {
        let d = Direction::new(0.0, FRAC_PI_2).unwrap();
        let v = steering_x(&d, 2);
        assert!(close(
            v.entries()[0],
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            1e-15
        ));
        assert!(close(
            v.entries()[1],
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
            1e-15
        ));
    }

    #[test]
    fn steering_y_endfire_alternates() {
        let d = Direction::new(FRAC_PI_2, FRAC_PI_2).unwrap();
        let v = steering_y(&d, 2);
        assert!(close(
            v.entries()[0],
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            1e-15
        ));
        assert!(close(
            v.entries()[1],
            Complex64::new(-FRAC_1_SQRT_2, 0.0),
            1e-15
        ));
    }

    #[test]
    fn steering_constant_modulus_and_reference() {
        let d = Direction::new(FRAC_PI_4, FRAC_PI_3).unwrap();
        let v = steering_x(&d, 8);
        assert_eq!(v.len(), 8);
        for e in v.entries() {
            assert!((e.norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }
        let y = steering_y(&d, 5);
        assert_eq!(y.entries()[0], Complex64::new(1.0 / 5f64.sqrt(), 0.0));
    }

    #[test]
    fn response_broadside_and_endfire() {
        let cfg = ArrayConfig::new(2, 2).unwrap();
        let a = array_response(&Direction::new(0.4, 0.0).unwrap(), &cfg);
        for &e in a.matrix().as_slice() {
            assert!(close(e, Complex64::new(0.5, 0.0), 1e-15));
        }
        let a = array_response(&Direction::new(0.0, FRAC_PI_2).unwrap(), &cfg);
        let m = a.matrix();
        for p in 0..2 {
            assert!(close(m[(p, 0)], Complex64::new(0.5, 0.0), 1e-15));
            assert!(close(m[(p, 1)], Complex64::new(-0.5, 0.0), 1e-15));
        }
    }

    #[test]
    fn response_entries_are_outer_product() {
        let cfg = ArrayConfig::new(3, 4).unwrap();
        let d = Direction::new(-2.1, 1.1).unwrap();
        let (ax, ay) = (steering_x(&d, 3), steering_y(&d, 4));
        let a = array_response(&d, &cfg);
        assert_eq!((a.matrix().rows(), a.matrix().cols()), (4, 3));
        for p in 0..4 {
            for q in 0..3 {
                assert_eq!(a.matrix()[(p, q)], ay.entries()[p] * ax.entries()[q]);
            }
        }
    }

    #[test]
    fn beam_has_unit_self_gain() {
        let cfg = ArrayConfig::new(4, 3).unwrap();
        let d = Direction::new(0.7, 2.2).unwrap();
        let w = beam(&d, &cfg);
        assert!((dot_h(&w, &w).re - 1.0).abs() < 1e-12);
        let h = vectorize(array_response(&d, &cfg).matrix());
        let g: Complex64 = h.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert!((g.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn codebook_single_element() {
        let book = dft_codebook(&ArrayConfig::new(1, 1).unwrap(), 1).unwrap();
        assert_eq!(book.len(), 1);
        assert_eq!(book[0].weights, vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn codebook_size_and_modulus() {
        let cfg = ArrayConfig::new(4, 2).unwrap();
        let book = dft_codebook(&cfg, 1).unwrap();
        assert!(!book.is_empty() && book.len() <= 8);
        for cw in &book {
            assert_eq!(cw.weights.len(), 8);
            for w in &cw.weights {
                assert!((w.norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
            }
        }
        assert!(dft_codebook(&cfg, 0).is_err());
        assert!(dft_codebook(&cfg, 3).unwrap().len() <= 9 * 8);
    }

    #[test]
    fn codeword_matches_its_direction() {
        let cfg = ArrayConfig::new(4, 4).unwrap();
        for cw in dft_codebook(&cfg, 2).unwrap() {
            let f = beam(&cw.direction, &cfg);
            assert!((dot_h(&f, &cw.weights).norm() - 1.0).abs() < 1e-9);
        }
    }
}
