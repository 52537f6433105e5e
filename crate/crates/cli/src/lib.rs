//! Command-line front end: spectra, bands, curves, critical values, closed forms and the
//! acceptance harness.

pub mod commands;
pub mod error;
pub mod output;
pub mod verify;
