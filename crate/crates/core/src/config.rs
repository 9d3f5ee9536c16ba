//! Toolkit configuration: one TOML file, one section per module.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adapt::{ArraySpec, TuningPolicy};
use crate::device::{DeviceGeometry, DeviceState, MaterialLayer, VgSweep};
use crate::eis::{CircuitParams, FrequencyGrid};
use crate::error::{Error, Result};
use crate::growth::GrowthModel;
use crate::transient::PulseTrainSpec;

pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDefaults {
    pub width_um: f64,
    pub length_um: f64,
    pub area_factor: f64,
    pub thickness_nm: f64,
    pub mobility_cm2_vs: f64,
    pub vol_capacitance_f_cm3: f64,
    pub vth_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitDefaults {
    pub rs_ohm: f64,
    pub rp_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EisDefaults {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points_per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientDefaults {
    pub rs_ohm: f64,
    pub amplitude_v: f64,
    pub width_s: f64,
    pub samples_per_segment: usize,
    pub threshold: f64,
    /// Leading fraction of pulses excluded from spike counting.
    pub skip_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDefaults {
    pub target_gm_s: f64,
    pub step_duration_s: f64,
    pub max_ep_time_s: f64,
    pub ep_potential_v: f64,
    pub vg_start_v: f64,
    pub vg_stop_v: f64,
    pub vg_points: usize,
    pub vd_v: f64,
    pub gm_noise_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDefaults {
    pub n_devices: usize,
    pub mobility_spread: f64,
    pub capacitance_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolkitConfig {
    pub seed: u64,
    pub device: DeviceDefaults,
    pub growth: GrowthModel,
    pub circuit: CircuitDefaults,
    pub eis: EisDefaults,
    pub transient: TransientDefaults,
    pub policy: PolicyDefaults,
    pub array: ArrayDefaults,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_CONFIG).expect("bundled default config is valid")
    }
}

impl ToolkitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every section must build its module type.
    pub fn validate(&self) -> Result<()> {
        let section = |name: &str, e: Error| Error::Config(format!("[{name}] {e}"));
        self.pristine_device().map_err(|e| section("device", e))?;
        self.growth.validate().map_err(|e| section("growth", e))?;
        let k6 = self.growth.mobility_factor.eval(0.6);
        let k7 = self.growth.mobility_factor.eval(0.7);
        if let (Ok(k6), Ok(k7)) = (k6, k7) {
            if !(k6 > 1.0 && 1.0 > k7) {
                return Err(section(
                    "growth",
                    Error::InvalidCalibration(format!(
                        "need mobility_factor(0.6) > 1 > mobility_factor(0.7), got {k6} and {k7}"
                    )),
                ));
            }
        }
        self.circuit_params(crate::device::total_capacitance(&self.pristine_device()?))
            .map_err(|e| section("circuit", e))?;
        self.frequency_grid().map_err(|e| section("eis", e))?;
        let t = &self.transient;
        if !(t.rs_ohm > 0.0 && t.rs_ohm.is_finite()) {
            return Err(section("transient", Error::InvalidCircuit("rs must be > 0".into())));
        }
        if t.samples_per_segment == 0 {
            return Err(section("transient", Error::InvalidPulseTrain("samples_per_segment must be >= 1".into())));
        }
        if !(t.threshold > 0.0 && t.threshold < 1.0) {
            return Err(section("transient", Error::InvalidThreshold(t.threshold)));
        }
        if !(0.0..1.0).contains(&t.skip_fraction) {
            return Err(section("transient", Error::InvalidPulseTrain("skip_fraction must be in [0, 1)".into())));
        }
        self.pulse_train(1.0e3, 3).map_err(|e| section("transient", e))?;
        self.tuning_policy().map_err(|e| section("policy", e))?;
        self.array_spec().map_err(|e| section("array", e))?;
        Ok(())
    }

    pub fn pristine_device(&self) -> Result<DeviceState> {
        self.device_with(self.device.mobility_cm2_vs, self.device.vol_capacitance_f_cm3)
    }

    pub fn device_with(&self, mobility: f64, vol_capacitance: f64) -> Result<DeviceState> {
        let d = &self.device;
        let geometry = DeviceGeometry::new(d.width_um, d.length_um, d.area_factor)?;
        let layer = MaterialLayer::spin_coated(d.thickness_nm, mobility, vol_capacitance)?;
        DeviceState::new(geometry, vec![layer], d.vth_v)
    }

    pub fn sweep(&self) -> Result<VgSweep> {
        let p = &self.policy;
        VgSweep::new(p.vg_start_v, p.vg_stop_v, p.vg_points)
    }

    pub fn circuit_params(&self, cp: f64) -> Result<CircuitParams> {
        CircuitParams::new(self.circuit.rs_ohm, self.circuit.rp_ohm, cp)
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        let e = &self.eis;
        FrequencyGrid::log_spaced(e.f_start_hz, e.f_stop_hz, e.points_per_decade)
    }

    pub fn pulse_train(&self, frequency_hz: f64, n_pulses: usize) -> Result<PulseTrainSpec> {
        PulseTrainSpec::new(self.transient.amplitude_v, self.transient.width_s, frequency_hz, n_pulses)
    }

    pub fn tuning_policy(&self) -> Result<TuningPolicy> {
        let p = &self.policy;
        TuningPolicy::new(p.target_gm_s, p.step_duration_s, p.max_ep_time_s, p.ep_potential_v, self.sweep()?, p.vd_v)
            .and_then(|policy| policy.with_gm_noise(p.gm_noise_rel))
    }

    pub fn array_spec(&self) -> Result<ArraySpec> {
        let a = &self.array;
        ArraySpec::new(a.n_devices, a.mobility_spread, a.capacitance_spread, self.seed)
    }
}
