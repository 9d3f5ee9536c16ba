//! Closed-loop transconductance tuning.
//!
//! A device is measured, and while its peak Gm is below target and EP time
//! remains, one more EP step is applied. Only potentiation is actuated; the
//! controller never drives a device into the depression regime on purpose.

use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{peak_transconductance, total_capacitance, DeviceState, MaterialLayer, VgSweep};
use crate::error::{Error, Result};
use crate::growth::{apply_ep_step, EpCondition, GrowthModel, EP_STREAM};
use crate::rng::SeedStream;

const INIT_STREAM: &str = "init";
const MEASURE_STREAM: &str = "measure";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningPolicy {
    pub target_gm_s: f64,
    pub step_duration_s: f64,
    pub max_ep_time_s: f64,
    pub ep_potential_v: f64,
    pub sweep: VgSweep,
    pub vd_v: f64,
    /// Relative std of multiplicative Gm measurement noise; 0 is noiseless.
    pub gm_noise_rel: f64,
}

impl TuningPolicy {
    pub fn new(
        target_gm_s: f64,
        step_duration_s: f64,
        max_ep_time_s: f64,
        ep_potential_v: f64,
        sweep: VgSweep,
        vd_v: f64,
    ) -> Result<Self> {
        if !(target_gm_s > 0.0 && target_gm_s.is_finite()) {
            return Err(Error::InvalidPolicy(format!("target Gm must be > 0, got {target_gm_s}")));
        }
        if !(step_duration_s > 0.0 && step_duration_s.is_finite()) {
            return Err(Error::InvalidPolicy(format!("step duration must be > 0, got {step_duration_s}")));
        }
        if !(max_ep_time_s >= step_duration_s && max_ep_time_s.is_finite()) {
            return Err(Error::InvalidPolicy(format!("max EP time {max_ep_time_s} s shorter than one step")));
        }
        sweep.validate()?;
        if vd_v.is_nan() || vd_v > 0.0 {
            return Err(Error::InvalidPolicy(format!("vd must be <= 0, got {vd_v}")));
        }
        Ok(Self { target_gm_s, step_duration_s, max_ep_time_s, ep_potential_v, sweep, vd_v, gm_noise_rel: 0.0 })
    }

    pub fn with_gm_noise(mut self, rel: f64) -> Result<Self> {
        if !(rel >= 0.0 && rel.is_finite()) {
            return Err(Error::InvalidPolicy(format!("Gm noise must be >= 0, got {rel}")));
        }
        self.gm_noise_rel = rel;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneStatus {
    Reached,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningStep {
    pub ep_time_s: f64,
    pub gm_s: f64,
    pub capacitance_f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub state: DeviceState,
    pub status: TuneStatus,
    pub steps: usize,
    pub ep_time_s: f64,
    /// One entry per measurement, including the initial one.
    pub trace: Vec<TuningStep>,
}

pub fn tune_device(
    state: &DeviceState,
    policy: &TuningPolicy,
    model: &GrowthModel,
    stream: &SeedStream,
) -> Result<TuningOutcome> {
    let noise = if policy.gm_noise_rel > 0.0 {
        Some(Normal::new(0.0, policy.gm_noise_rel).map_err(|e| Error::InvalidPolicy(e.to_string()))?)
    } else {
        None
    };
    let mut state = state.clone();
    let mut ep_time = 0.0;
    let mut steps = 0usize;
    let mut trace = Vec::new();
    loop {
        let mut gm = peak_transconductance(&state, &policy.sweep, policy.vd_v)?.gm_s;
        if let Some(noise) = noise {
            gm *= 1.0 + noise.sample(&mut stream.rng(MEASURE_STREAM, steps as u64));
        }
        trace.push(TuningStep { ep_time_s: ep_time, gm_s: gm, capacitance_f: total_capacitance(&state) });

        let status = if gm >= policy.target_gm_s {
            Some(TuneStatus::Reached)
        } else if ep_time >= policy.max_ep_time_s {
            Some(TuneStatus::Budget)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(TuningOutcome { state, status, steps, ep_time_s: ep_time, trace });
        }

        let remaining = policy.max_ep_time_s - ep_time;
        let (duration, next_time) = if remaining <= policy.step_duration_s {
            (remaining, policy.max_ep_time_s)
        } else {
            (policy.step_duration_s, ep_time + policy.step_duration_s)
        };
        let cond = EpCondition::new(policy.ep_potential_v, duration)?;
        let mut rng = stream.rng(EP_STREAM, steps as u64);
        state = apply_ep_step(&state, &cond, model, &mut rng)?;
        steps += 1;
        ep_time = next_time;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub n_devices: usize,
    /// Relative std of the log-normal mobility distribution.
    pub mobility_spread: f64,
    /// Relative std of the normal C* jitter.
    pub capacitance_spread: f64,
    pub seed: u64,
}

impl ArraySpec {
    pub fn new(n_devices: usize, mobility_spread: f64, capacitance_spread: f64, seed: u64) -> Result<Self> {
        if n_devices == 0 {
            return Err(Error::InvalidArraySpec("need at least one device".into()));
        }
        for (name, v) in [("mobility_spread", mobility_spread), ("capacitance_spread", capacitance_spread)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArraySpec(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(Self { n_devices, mobility_spread, capacitance_spread, seed })
    }

    pub fn device_stream(&self, index: usize) -> SeedStream {
        SeedStream::new(self.seed, index as u64)
    }
}

/// Draws one pristine device around `nominal`: the spin-coated mobility is
/// scaled by a mean-one log-normal factor, C* by `1 + spread * z`.
pub fn sample_initial_state(nominal: &DeviceState, spec: &ArraySpec, index: usize) -> Result<DeviceState> {
    let mut rng = spec.device_stream(index).rng(INIT_STREAM, 0);
    let z_mu: f64 = StandardNormal.sample(&mut rng);
    let z_c: f64 = StandardNormal.sample(&mut rng);
    let sigma = (1.0 + spec.mobility_spread.powi(2)).ln().sqrt();
    let mobility_scale = (sigma * z_mu - sigma * sigma / 2.0).exp();
    let cap_scale = (1.0 + spec.capacitance_spread * z_c).max(1e-3);
    let layers = nominal
        .layers()
        .iter()
        .map(|l| {
            MaterialLayer::new(
                l.thickness_nm,
                l.mobility_cm2_vs * mobility_scale,
                l.vol_capacitance_f_cm3 * cap_scale,
                l.origin,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    DeviceState::new(*nominal.geometry(), layers, nominal.vth())
}

pub fn sample_initial_states(nominal: &DeviceState, spec: &ArraySpec) -> Result<Vec<DeviceState>> {
    (0..spec.n_devices).map(|i| sample_initial_state(nominal, spec, i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

/// Gaussian fit by sample moments (unbiased standard deviation).
pub fn gaussian_fit(samples: &[f64]) -> Result<Moments> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(Moments { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceOutcome {
    pub index: usize,
    pub initial_gm_s: f64,
    pub final_gm_s: f64,
    pub initial_capacitance_f: f64,
    pub final_capacitance_f: f64,
    pub ep_time_s: f64,
    pub steps: usize,
    pub status: TuneStatus,
    pub trace: Vec<TuningStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    pub gm_before: Moments,
    pub gm_after: Moments,
    pub capacitance_before: Moments,
    pub capacitance_after: Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningSummary {
    pub n_devices: usize,
    pub reached: usize,
    pub budget: usize,
    pub moments: PopulationMoments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub per_device: Vec<DeviceOutcome>,
    pub summary: TuningSummary,
    /// Gaussian fits of the four histograms.
    pub gaussian_fit: PopulationMoments,
}

impl TuningReport {
    fn column(&self, f: impl Fn(&DeviceOutcome) -> f64) -> Vec<f64> {
        self.per_device.iter().map(f).collect()
    }

    pub fn initial_gm(&self) -> Vec<f64> {
        self.column(|d| d.initial_gm_s)
    }

    pub fn final_gm(&self) -> Vec<f64> {
        self.column(|d| d.final_gm_s)
    }

    pub fn initial_capacitance(&self) -> Vec<f64> {
        self.column(|d| d.initial_capacitance_f)
    }

    pub fn final_capacitance(&self) -> Vec<f64> {
        self.column(|d| d.final_capacitance_f)
    }

    /// Moments recomputed from `per_device`. With a single device the
    /// spread is reported as zero.
    pub fn recompute_moments(&self) -> Result<PopulationMoments> {
        let fit = |xs: Vec<f64>| -> Result<Moments> {
            if xs.len() == 1 {
                Ok(Moments { mean: xs[0], std: 0.0 })
            } else {
                gaussian_fit(&xs)
            }
        };
        Ok(PopulationMoments {
            gm_before: fit(self.initial_gm())?,
            gm_after: fit(self.final_gm())?,
            capacitance_before: fit(self.initial_capacitance())?,
            capacitance_after: fit(self.final_capacitance())?,
        })
    }
}

pub fn outcome_for(index: usize, initial: &DeviceState, outcome: TuningOutcome) -> DeviceOutcome {
    let first = outcome.trace.first().copied().expect("trace holds the initial measurement");
    let last = outcome.trace.last().copied().expect("trace holds the final measurement");
    DeviceOutcome {
        index,
        initial_gm_s: first.gm_s,
        final_gm_s: last.gm_s,
        initial_capacitance_f: total_capacitance(initial),
        final_capacitance_f: total_capacitance(&outcome.state),
        ep_time_s: outcome.ep_time_s,
        steps: outcome.steps,
        status: outcome.status,
        trace: outcome.trace,
    }
}

/// Samples `spec.n_devices` pristine devices around `nominal` and tunes each
/// on its own random stream. Devices are tuned in parallel; the report is in
/// device order and does not depend on scheduling.
pub fn tune_array(
    nominal: &DeviceState,
    spec: &ArraySpec,
    policy: &TuningPolicy,
    model: &GrowthModel,
) -> Result<TuningReport> {
    let per_device = (0..spec.n_devices)
        .into_par_iter()
        .map(|i| {
            let initial = sample_initial_state(nominal, spec, i)?;
            let outcome = tune_device(&initial, policy, model, &spec.device_stream(i))?;
            Ok(outcome_for(i, &initial, outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    let reached = per_device.iter().filter(|d| d.status == TuneStatus::Reached).count();
    let mut report = TuningReport {
        summary: TuningSummary {
            n_devices: per_device.len(),
            reached,
            budget: per_device.len() - reached,
            moments: PopulationMoments {
                gm_before: Moments { mean: 0.0, std: 0.0 },
                gm_after: Moments { mean: 0.0, std: 0.0 },
                capacitance_before: Moments { mean: 0.0, std: 0.0 },
                capacitance_after: Moments { mean: 0.0, std: 0.0 },
            },
        },
        gaussian_fit: PopulationMoments {
            gm_before: Moments { mean: 0.0, std: 0.0 },
            gm_after: Moments { mean: 0.0, std: 0.0 },
            capacitance_before: Moments { mean: 0.0, std: 0.0 },
            capacitance_after: Moments { mean: 0.0, std: 0.0 },
        },
        per_device,
    };
    let moments = report.recompute_moments()?;
    report.summary.moments = moments;
    report.gaussian_fit = moments;
    Ok(report)
}
