//! Beamspace representation of mmWave MU-MISO channels and the two-stage
//! multi-user hybrid beamforming built on top of it.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. Everything here is a pure function of its inputs; file formats,
//! threading and the command-line front end live in `beamspace-cli`.
//!
//! Module map:
//!
//! * [`array`]: uniform rectangular array steering vectors, array response,
//!   the row-major `vec` convention and DFT codebooks.
//! * [`channel`]: clustered geometric multipath channels, synthetic scenario
//!   generation and the per-subcarrier frequency response.
//! * [`beamspace`]: AoD-lists, path truncation, the gain-agnostic beamspace
//!   grid and peak extraction.
//! * [`encoding`]: hard/soft AoD-list encodings, channel similarity, BCE and
//!   soft-contrastive losses, MAD and MAE-in-cosines.
//! * [`precoding`]: residual-beamspace RF beam selection, effective channel
//!   estimation, RZF digital precoding and the baselines.
//! * [`evaluation`]: achievable spectral efficiency, user-cluster selection,
//!   Monte Carlo EIRP sweeps and the link-establishment overhead figures.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod array;
pub mod beamspace;
pub mod channel;
pub mod encoding;
mod error;
pub mod evaluation;
pub mod linalg;
mod math;
pub mod precoding;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;
