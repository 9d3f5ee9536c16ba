//! Simulation and calibration toolkit for organic electrochemical
//! transistors (OECTs) tuned after fabrication by electropolymerization.
//!
//! - [`device`]: layered channel model, drain current, transconductance,
//!   total capacitance.
//! - [`growth`]: electropolymerization steps that append material layers.
//! - [`eis`]: impedance spectra of the `Rs + (Rp || Cp)` circuit and their
//!   least-squares fitting.
//! - [`transient`]: pulse-train response and threshold spike counting.
//! - [`adapt`]: closed-loop Gm tuning for single devices and arrays.
//! - [`config`], [`output`], [`cli`]: configuration, report formatting and
//!   the `oect` command-line front end.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod device;
pub mod eis;
pub mod error;
pub mod growth;
pub mod output;
pub mod rng;
pub mod schedule;
pub mod transient;

pub use config::ToolkitConfig;
pub use error::{Error, Result};
