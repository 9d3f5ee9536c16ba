//! Impedance spectra of the `Rs + (Rp || Cp)` equivalent circuit.

mod fit;
mod io;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fit::{fit_circuit, fit_circuit_with, initial_guess, FitOptions, FitReport};
pub use io::{parse_spectrum_csv, write_spectrum_csv, SPECTRUM_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Series (electrolyte) resistance, ohm.
    pub rs: f64,
    /// Parallel (channel/leak) resistance, ohm.
    pub rp: f64,
    /// Total device capacitance, farad.
    pub cp: f64,
}

impl CircuitParams {
    pub fn new(rs: f64, rp: f64, cp: f64) -> Result<Self> {
        for (name, v) in [("rs", rs), ("rp", rp), ("cp", cp)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidCircuit(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self { rs, rp, cp })
    }

    pub fn impedance(&self, freq_hz: f64) -> Complex64 {
        let omega = 2.0 * PI * freq_hz;
        let denom = Complex64::new(1.0, omega * self.rp * self.cp);
        Complex64::new(self.rs, 0.0) + self.rp / denom
    }

    /// Frequency of the Nyquist semicircle apex, `1 / (2 pi Rp Cp)`.
    pub fn apex_frequency(&self) -> f64 {
        1.0 / (2.0 * PI * self.rp * self.cp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    frequencies: Vec<f64>,
    points_per_decade: usize,
}

impl FrequencyGrid {
    pub fn new(frequencies: Vec<f64>, points_per_decade: usize) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if frequencies.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidGrid("frequencies must be > 0".into()));
        }
        if !strictly_monotone(&frequencies) {
            return Err(Error::InvalidGrid("frequencies must be strictly monotone".into()));
        }
        Ok(Self { frequencies, points_per_decade })
    }

    /// Logarithmic grid from `f_start` to `f_stop` (either direction), both
    /// endpoints included.
    pub fn log_spaced(f_start: f64, f_stop: f64, points_per_decade: usize) -> Result<Self> {
        if points_per_decade == 0 {
            return Err(Error::InvalidGrid("points_per_decade must be >= 1".into()));
        }
        if !(f_start > 0.0 && f_stop > 0.0 && f_start.is_finite() && f_stop.is_finite()) {
            return Err(Error::InvalidGrid("grid bounds must be > 0".into()));
        }
        if f_start == f_stop {
            return Err(Error::InvalidGrid("grid bounds must differ".into()));
        }
        let (l0, l1) = (f_start.log10(), f_stop.log10());
        let decades = (l1 - l0).abs();
        let intervals = ((decades * points_per_decade as f64) - 1e-9).ceil().max(1.0) as usize;
        let step = (l1 - l0) / intervals as f64;
        let frequencies = (0..=intervals)
            .map(|i| match i {
                0 => f_start,
                i if i == intervals => f_stop,
                i => 10f64.powf(l0 + step * i as f64),
            })
            .collect();
        Self::new(frequencies, points_per_decade)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn points_per_decade(&self) -> usize {
        self.points_per_decade
    }
}

fn strictly_monotone(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedancePoint {
    pub freq_hz: f64,
    pub re_ohm: f64,
    pub im_ohm: f64,
}

impl ImpedancePoint {
    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re_ohm, self.im_ohm)
    }
}

/// Frequency-indexed impedance with free-form `key=value` metadata.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpedanceSpectrum {
    pub points: Vec<ImpedancePoint>,
    pub metadata: BTreeMap<String, String>,
}

impl ImpedanceSpectrum {
    pub fn new(points: Vec<ImpedancePoint>) -> Result<Self> {
        let freqs: Vec<f64> = points.iter().map(|p| p.freq_hz).collect();
        if freqs.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidGrid("frequencies must be > 0".into()));
        }
        if !strictly_monotone(&freqs) {
            return Err(Error::InvalidGrid("frequencies must be strictly monotone".into()));
        }
        if points.iter().any(|p| !p.re_ohm.is_finite() || !p.im_ohm.is_finite()) {
            return Err(Error::InvalidGrid("impedance values must be finite".into()));
        }
        Ok(Self { points, metadata: BTreeMap::new() })
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Multiplies every impedance by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let points =
            self.points.iter().map(|p| ImpedancePoint { re_ohm: p.re_ohm * k, im_ohm: p.im_ohm * k, ..*p }).collect();
        Self { points, metadata: self.metadata.clone() }
    }
}

pub fn simulate_spectrum(params: &CircuitParams, grid: &FrequencyGrid) -> ImpedanceSpectrum {
    let points = grid
        .frequencies()
        .iter()
        .map(|&f| {
            let z = params.impedance(f);
            ImpedancePoint { freq_hz: f, re_ohm: z.re, im_ohm: z.im }
        })
        .collect();
    ImpedanceSpectrum { points, metadata: BTreeMap::new() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodePoint {
    pub freq_hz: f64,
    pub modulus_ohm: f64,
    pub phase_deg: f64,
}

pub fn bode(spectrum: &ImpedanceSpectrum) -> Vec<BodePoint> {
    spectrum
        .points
        .iter()
        .map(|p| BodePoint {
            freq_hz: p.freq_hz,
            modulus_ohm: p.re_ohm.hypot(p.im_ohm),
            phase_deg: p.im_ohm.atan2(p.re_ohm).to_degrees(),
        })
        .collect()
}

/// `(Re Z, -Im Z)` pairs.
pub fn nyquist(spectrum: &ImpedanceSpectrum) -> Vec<(f64, f64)> {
    spectrum.points.iter().map(|p| (p.re_ohm, -p.im_ohm)).collect()
}

/// Least-squares slope of `log10 |Z|` against `log10 f` over `[f_lo, f_hi]`.
pub fn slope_in_band(spectrum: &ImpedanceSpectrum, f_lo: f64, f_hi: f64) -> Result<f64> {
    let (lo, hi) = (f_lo * (1.0 - 1e-9), f_hi * (1.0 + 1e-9));
    let pts: Vec<(f64, f64)> = bode(spectrum)
        .into_iter()
        .filter(|b| b.freq_hz >= lo && b.freq_hz <= hi)
        .map(|b| (b.freq_hz.log10(), b.modulus_ohm.log10()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!("band [{f_lo}, {f_hi}] Hz holds {} points, need 3", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}
