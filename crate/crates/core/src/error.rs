use thiserror::Error;

use crate::eis::CircuitParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device: {0}")]
    InvalidDevice(String),

    #[error("invalid bias: {0}")]
    InvalidBias(String),

    #[error("invalid sweep specification: {0}")]
    InvalidSweep(String),

    #[error("potential {potential} V outside calibrated range [{min}, {max}] V")]
    UncalibratedPotential { potential: f64, min: f64, max: f64 },

    #[error("invalid calibration table: {0}")]
    InvalidCalibration(String),

    #[error("invalid EP condition: {0}")]
    InvalidCondition(String),

    #[error("invalid circuit parameters: {0}")]
    InvalidCircuit(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("spectrum has no reactive component; Cp is unidentifiable")]
    UnidentifiableSpectrum,

    #[error(
        "fit did not converge after {iterations} iterations \
         (best rs={} rp={} cp={}, residual={residual})",
        best.rs, best.rp, best.cp
    )]
    FitDidNotConverge { best: CircuitParams, residual: f64, iterations: usize },

    #[error("invalid pulse train: {0}")]
    InvalidPulseTrain(String),

    #[error("trace too short: {pulses} pulses, need at least {required}")]
    TraceTooShort { pulses: usize, required: usize },

    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),

    #[error("invalid tuning policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid array specification: {0}")]
    InvalidArraySpec(String),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical procedure rather than of its inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::FitDidNotConverge { .. } | Error::UnidentifiableSpectrum)
    }
}
