// Float methods come from `std` when it is linked and from `libm` otherwise.
#[cfg(not(feature = "std"))]
pub(crate) use num_traits::Float;

pub(crate) const PI: f64 = core::f64::consts::PI;
pub(crate) const TAU: f64 = core::f64::consts::TAU;

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub(crate) fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
