//! Gate pulse-train response of the lumped RC device.
//!
//! The normalized output is the charging fraction of the device capacitance
//! through the series resistance: it relaxes toward 1 while a pulse is
//! applied and toward 0 between pulses, with `tau = rs * cp`. The same
//! quantity stands for the normalized drain-current modulation, so pulse
//! amplitude and the Gm scale drop out.
//!
//! Modulation is measured in these full-scale units: a swing of 0.5 means
//! the response moved by half of its DC-charged level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default fraction of leading pulses treated as the charging transient.
pub const DEFAULT_SKIP_FRACTION: f64 = 0.2;

/// Fraction of pulses, taken from the end, forming the steady-state window.
pub const STEADY_STATE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainSpec {
    pub amplitude_v: f64,
    pub width_s: f64,
    pub frequency_hz: f64,
    pub n_pulses: usize,
}

impl PulseTrainSpec {
    pub fn new(amplitude_v: f64, width_s: f64, frequency_hz: f64, n_pulses: usize) -> Result<Self> {
        let spec = Self { amplitude_v, width_s, frequency_hz, n_pulses };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.amplitude_v) {
            return Err(Error::InvalidPulseTrain(format!("amplitude must be > 0, got {}", self.amplitude_v)));
        }
        if !positive(self.width_s) || !positive(self.frequency_hz) {
            return Err(Error::InvalidPulseTrain("width and frequency must be > 0".into()));
        }
        if self.width_s >= self.period_s() {
            return Err(Error::InvalidPulseTrain(format!(
                "pulse width {} s must be shorter than the period {} s",
                self.width_s,
                self.period_s()
            )));
        }
        if self.n_pulses == 0 {
            return Err(Error::InvalidPulseTrain("need at least one pulse".into()));
        }
        Ok(())
    }

    pub fn period_s(&self) -> f64 {
        1.0 / self.frequency_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time_s: f64,
    pub response: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientTrace {
    samples: Vec<TraceSample>,
    pulse_boundaries: Vec<(f64, f64)>,
}

impl TransientTrace {
    pub fn new(samples: Vec<TraceSample>, pulse_boundaries: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].time_s <= w[0].time_s) {
            return Err(Error::InvalidPulseTrain("sample times must strictly increase".into()));
        }
        if samples.iter().any(|s| !(s.response >= 0.0 && s.response <= 1.0 + 1e-9)) {
            return Err(Error::InvalidPulseTrain("response must lie in [0, 1]".into()));
        }
        if pulse_boundaries.iter().any(|&(a, b)| a.is_nan() || b.is_nan() || b <= a) {
            return Err(Error::InvalidPulseTrain("pulse boundaries must have end > start".into()));
        }
        Ok(Self { samples, pulse_boundaries })
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn pulse_boundaries(&self) -> &[(f64, f64)] {
        &self.pulse_boundaries
    }

    fn span_tolerance(&self) -> f64 {
        let end = self.samples.last().map_or(1.0, |s| s.time_s.abs());
        end * 1e-12
    }

    /// Samples with `start <= t <= end`, allowing for rounding at the edges.
    fn window(&self, start: f64, end: f64) -> impl Iterator<Item = &TraceSample> {
        let tol = self.span_tolerance();
        self.samples.iter().filter(move |s| s.time_s >= start - tol && s.time_s <= end + tol)
    }
}

/// Closed-form piecewise response to a pulse train, starting discharged.
/// Each on and off segment is sampled at `samples_per_segment` points after
/// its start; the trace also holds the initial sample at `t = 0`.
pub fn simulate_pulse_train(
    rs: f64,
    cp: f64,
    spec: &PulseTrainSpec,
    samples_per_segment: usize,
) -> Result<TransientTrace> {
    if !(rs > 0.0 && rs.is_finite() && cp > 0.0 && cp.is_finite()) {
        return Err(Error::InvalidCircuit(format!("rs and cp must be > 0, got {rs} and {cp}")));
    }
    spec.validate()?;
    if samples_per_segment == 0 {
        return Err(Error::InvalidPulseTrain("samples_per_segment must be >= 1".into()));
    }
    let tau = rs * cp;
    let period = spec.period_s();
    let width = spec.width_s;
    let n_seg = samples_per_segment;

    let mut samples = Vec::with_capacity(1 + 2 * n_seg * spec.n_pulses);
    let mut boundaries = Vec::with_capacity(spec.n_pulses);
    samples.push(TraceSample { time_s: 0.0, response: 0.0 });
    let mut level = 0.0;
    let mut segment = |start: f64, length: f64, target: f64, level: &mut f64| {
        let from = *level;
        for j in 1..=n_seg {
            let dt = length * j as f64 / n_seg as f64;
            let response = target + (from - target) * (-dt / tau).exp();
            samples.push(TraceSample { time_s: start + dt, response });
        }
        *level = samples.last().map(|s| s.response).unwrap_or(from);
    };
    for k in 0..spec.n_pulses {
        let start = k as f64 * period;
        boundaries.push((start, start + width));
        segment(start, width, 1.0, &mut level);
        segment(start + width, period - width, 0.0, &mut level);
    }
    Ok(TransientTrace { samples, pulse_boundaries: boundaries })
}

/// Steady-state modulation: `max - min` of the response over the final 20%
/// of pulses (at least one), from the start of the first window pulse to the
/// end of the trace.
pub fn modulation_depth(trace: &TransientTrace) -> Result<f64> {
    let n = trace.pulse_boundaries.len();
    if n < 3 {
        return Err(Error::TraceTooShort { pulses: n, required: 3 });
    }
    let window = ((n as f64 * STEADY_STATE_FRACTION).ceil() as usize).clamp(1, n);
    let start = trace.pulse_boundaries[n - window].0;
    let end = trace.samples.last().map_or(start, |s| s.time_s);
    let (lo, hi) = trace
        .window(start, end)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.response), hi.max(s.response)));
    Ok(if hi >= lo { hi - lo } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseCrossing {
    pub index: usize,
    pub floor: f64,
    pub peak: f64,
    pub swing: f64,
    /// Outside the leading transient and therefore countable.
    pub eligible: bool,
    pub crossed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    pub threshold: f64,
    pub skipped: usize,
    pub eligible: usize,
    pub count: usize,
    pub pulses: Vec<PulseCrossing>,
}

/// Counts pulses whose rising swing (peak minus the floor at pulse onset)
/// reaches `threshold`, ignoring the leading `skip_fraction` of pulses.
pub fn spike_report(trace: &TransientTrace, threshold: f64, skip_fraction: f64) -> Result<SpikeReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    if !(0.0..1.0).contains(&skip_fraction) {
        return Err(Error::InvalidPulseTrain(format!("skip fraction {skip_fraction} outside [0, 1)")));
    }
    let n = trace.pulse_boundaries.len();
    let skipped = ((n as f64 * skip_fraction).ceil() as usize).min(n);
    let pulses: Vec<PulseCrossing> = trace
        .pulse_boundaries
        .iter()
        .enumerate()
        .map(|(index, &(start, end))| {
            let (floor, peak) = trace
                .window(start, end)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.response), hi.max(s.response)));
            let swing = if peak >= floor { peak - floor } else { 0.0 };
            PulseCrossing { index, floor, peak, swing, eligible: index >= skipped, crossed: swing >= threshold }
        })
        .collect();
    let count = pulses.iter().filter(|p| p.eligible && p.crossed).count();
    Ok(SpikeReport { threshold, skipped, eligible: n - skipped, count, pulses })
}

pub fn spike_count(trace: &TransientTrace, threshold: f64) -> Result<usize> {
    Ok(spike_report(trace, threshold, DEFAULT_SKIP_FRACTION)?.count)
}
