use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Elevation outside `[0, pi]` or a non-finite angle.
    InvalidAngle {
        azimuth: f64,
        elevation: f64,
    },
    /// A configuration value violates its documented range.
    InvalidConfig(String),
    /// A path delay falls outside the `D * T_s` tap window.
    DelayOutsideTapWindow {
        delay: f64,
        window: f64,
    },
    /// Every entry of a (residual) beamspace is non-positive.
    DegenerateResidual,
    /// An encoding with zero 2-norm was used where a direction is needed.
    ZeroEncoding,
    /// A feature vector with zero 2-norm.
    ZeroFeature,
    /// An effective channel or precoder column collapsed to zero.
    ZeroChannel,
    ShapeMismatch(String),
    GridMismatch,
    EmptyInput(&'static str),
    NonFinite(&'static str),
    /// A required externally supplied estimate is missing.
    MissingEstimate {
        trial: usize,
        ue_id: u32,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidAngle { azimuth, elevation } => write!(
                f,
                "invalid direction (azimuth {azimuth} rad, elevation {elevation} rad): elevation must lie in [0, pi]"
            ),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DelayOutsideTapWindow { delay, window } => {
                write!(f, "path delay {delay:e} s outside tap window [0, {window:e}) s")
            }
            Error::DegenerateResidual => write!(f, "residual beamspace has no positive entry"),
            Error::ZeroEncoding => write!(f, "encoding has zero norm"),
            Error::ZeroFeature => write!(f, "feature vector has zero norm"),
            Error::ZeroChannel => write!(f, "effective channel or precoder column is zero"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::GridMismatch => write!(f, "beamspaces are defined on different grids"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::MissingEstimate { trial, ue_id } => {
                write!(f, "no estimate supplied for trial {trial}, UE {ue_id}")
            }
        }
    }
}

impl core::error::Error for Error {}
