//! Command-line front end for `beamspace-core`: run configuration and
//! presets, JSON/CSV file formats, manifests and the sweep driver.

pub mod commands;
pub mod config;
pub mod formats;
