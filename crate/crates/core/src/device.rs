//! Steady-state OECT model.
//!
//! The channel is a stack of mixed ionic-electronic conducting layers. Each
//! layer contributes `d * mu * C*` to the channel conductance factor and
//! `d * C*` to the capacitive volume, so transconductance scales as
//! `mu * C*` and the total capacitance is additive in volume.
//!
//! Current follows the classic depletion-mode OECT model for a p-type
//! channel: positive gate voltage de-dopes the channel, the drain is biased
//! at `vd <= 0` and the returned drain current is negative (holes flow from
//! source to drain). Transconductance is reported as the positive quantity
//! `dI/dVg`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UM_TO_CM: f64 = 1e-4;
const NM_TO_CM: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    pub width_um: f64,
    pub length_um: f64,
    /// Effective capacitive area multiplier (>= 1).
    pub area_factor: f64,
}

impl DeviceGeometry {
    pub fn new(width_um: f64, length_um: f64, area_factor: f64) -> Result<Self> {
        if !(width_um > 0.0 && width_um.is_finite()) {
            return Err(Error::InvalidDevice(format!("width must be > 0, got {width_um}")));
        }
        if !(length_um > 0.0 && length_um.is_finite()) {
            return Err(Error::InvalidDevice(format!("length must be > 0, got {length_um}")));
        }
        if !(area_factor >= 1.0 && area_factor.is_finite()) {
            return Err(Error::InvalidDevice(format!("area factor must be >= 1, got {area_factor}")));
        }
        Ok(Self { width_um, length_um, area_factor })
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.width_um / self.length_um
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerOrigin {
    SpinCoated,
    Electropolymerized { potential_v: f64 },
}

impl LayerOrigin {
    pub fn is_electropolymerized(&self) -> bool {
        matches!(self, LayerOrigin::Electropolymerized { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialLayer {
    pub thickness_nm: f64,
    pub mobility_cm2_vs: f64,
    pub vol_capacitance_f_cm3: f64,
    pub origin: LayerOrigin,
}

impl MaterialLayer {
    pub fn new(
        thickness_nm: f64,
        mobility_cm2_vs: f64,
        vol_capacitance_f_cm3: f64,
        origin: LayerOrigin,
    ) -> Result<Self> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(thickness_nm) {
            return Err(Error::InvalidDevice(format!("layer thickness must be > 0, got {thickness_nm}")));
        }
        if !positive(mobility_cm2_vs) {
            return Err(Error::InvalidDevice(format!("layer mobility must be > 0, got {mobility_cm2_vs}")));
        }
        if !positive(vol_capacitance_f_cm3) {
            return Err(Error::InvalidDevice(format!(
                "layer volumetric capacitance must be > 0, got {vol_capacitance_f_cm3}"
            )));
        }
        Ok(Self { thickness_nm, mobility_cm2_vs, vol_capacitance_f_cm3, origin })
    }

    pub fn spin_coated(thickness_nm: f64, mobility: f64, vol_capacitance: f64) -> Result<Self> {
        Self::new(thickness_nm, mobility, vol_capacitance, LayerOrigin::SpinCoated)
    }

    /// `d * C*` in F/cm^2.
    fn capacitance_per_area(&self) -> f64 {
        self.thickness_nm * NM_TO_CM * self.vol_capacitance_f_cm3
    }

    /// `d * mu * C*` in S/V.
    fn conductance_factor(&self) -> f64 {
        self.capacitance_per_area() * self.mobility_cm2_vs
    }
}

/// Immutable snapshot of a device. Electropolymerization produces new states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    geometry: DeviceGeometry,
    layers: Vec<MaterialLayer>,
    vth_v: f64,
}

impl DeviceState {
    pub fn new(geometry: DeviceGeometry, layers: Vec<MaterialLayer>, vth_v: f64) -> Result<Self> {
        match layers.first() {
            None => return Err(Error::InvalidDevice("layer stack is empty".into())),
            Some(first) if first.origin != LayerOrigin::SpinCoated => {
                return Err(Error::InvalidDevice("first layer must be spin-coated".into()))
            }
            _ => {}
        }
        if !vth_v.is_finite() {
            return Err(Error::InvalidDevice(format!("threshold voltage must be finite, got {vth_v}")));
        }
        Ok(Self { geometry, layers, vth_v })
    }

    pub fn geometry(&self) -> &DeviceGeometry {
        &self.geometry
    }

    pub fn layers(&self) -> &[MaterialLayer] {
        &self.layers
    }

    pub fn vth(&self) -> f64 {
        self.vth_v
    }

    /// Cumulative thickness of all electropolymerized layers (nm).
    pub fn ep_thickness_nm(&self) -> f64 {
        self.layers.iter().filter(|l| l.origin.is_electropolymerized()).map(|l| l.thickness_nm).sum()
    }

    pub(crate) fn with_layers(&self, layers: Vec<MaterialLayer>) -> Self {
        Self { geometry: self.geometry, layers, vth_v: self.vth_v }
    }

    pub fn with_vth(&self, vth_v: f64) -> Result<Self> {
        Self::new(self.geometry, self.layers.clone(), vth_v)
    }

    /// `(W/L) * sum(d_i * mu_i * C*_i)` in S/V.
    pub fn conductance_factor(&self) -> f64 {
        self.geometry.aspect_ratio() * self.layers.iter().map(MaterialLayer::conductance_factor).sum::<f64>()
    }
}

pub fn total_capacitance(state: &DeviceState) -> f64 {
    let g = &state.geometry;
    let area_cm2 = g.area_factor * g.width_um * UM_TO_CM * g.length_um * UM_TO_CM;
    area_cm2 * state.layers.iter().map(MaterialLayer::capacitance_per_area).sum::<f64>()
}

fn check_bias(vg: f64, vd: f64) -> Result<()> {
    if !vg.is_finite() || !vd.is_finite() {
        return Err(Error::InvalidBias(format!("non-finite bias vg={vg} vd={vd}")));
    }
    if vd > 0.0 {
        return Err(Error::InvalidBias(format!("drain bias must be <= 0 V, got {vd}")));
    }
    Ok(())
}

/// Drain current (A). Negative for `vd < 0`, zero once the channel is
/// fully depleted (`vg >= vth`).
pub fn drain_current(state: &DeviceState, vg: f64, vd: f64) -> Result<f64> {
    check_bias(vg, vd)?;
    let k = state.conductance_factor();
    let overdrive = state.vth_v - vg;
    if overdrive <= 0.0 {
        return Ok(0.0);
    }
    if -vd < overdrive {
        Ok(k * (overdrive + vd / 2.0) * vd)
    } else {
        Ok(-k * overdrive * overdrive / 2.0)
    }
}

/// Analytic `dI/dVg` (S).
pub fn transconductance(state: &DeviceState, vg: f64, vd: f64) -> Result<f64> {
    check_bias(vg, vd)?;
    let overdrive = state.vth_v - vg;
    if overdrive <= 0.0 {
        return Ok(0.0);
    }
    Ok(state.conductance_factor() * overdrive.min(-vd))
}

/// Uniformly spaced gate sweep, ascending or descending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgSweep {
    pub start_v: f64,
    pub stop_v: f64,
    pub points: usize,
}

impl VgSweep {
    pub fn new(start_v: f64, stop_v: f64, points: usize) -> Result<Self> {
        let sweep = Self { start_v, stop_v, points };
        sweep.validate()?;
        Ok(sweep)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidSweep("sweep has no points".into()));
        }
        if !self.start_v.is_finite() || !self.stop_v.is_finite() {
            return Err(Error::InvalidSweep("sweep bounds must be finite".into()));
        }
        if self.points > 1 && self.start_v == self.stop_v {
            return Err(Error::InvalidSweep("multi-point sweep needs distinct bounds".into()));
        }
        Ok(())
    }

    pub fn voltages(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points;
        let step = if n > 1 { (self.stop_v - self.start_v) / (n - 1) as f64 } else { 0.0 };
        (0..n).map(move |i| if i + 1 == n { self.stop_v } else { self.start_v + step * i as f64 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakGm {
    pub gm_s: f64,
    pub vg_v: f64,
}

/// Maximum Gm over the sweep; ties resolve to the lowest gate voltage.
pub fn peak_transconductance(state: &DeviceState, sweep: &VgSweep, vd: f64) -> Result<PeakGm> {
    sweep.validate()?;
    let mut best: Option<PeakGm> = None;
    for vg in sweep.voltages() {
        let gm = transconductance(state, vg, vd)?;
        let better = match best {
            None => true,
            Some(b) => gm > b.gm_s || (gm == b.gm_s && vg < b.vg_v),
        };
        if better {
            best = Some(PeakGm { gm_s: gm, vg_v: vg });
        }
    }
    Ok(best.expect("validated sweep is non-empty"))
}
