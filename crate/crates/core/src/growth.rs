//! Potentiostatic electropolymerization (EP).
//!
//! Every EP step appends one layer to the device stack. Thickness comes from
//! a deposition rate that depends only on the applied potential (constant in
//! time); the new material's mobility and volumetric capacitance are the
//! global reference values scaled by potential-dependent factors.
//!
//! Long EP runs degrade the mobility of all electropolymerized material once
//! the cumulative EP thickness passes `decay.threshold_nm`:
//! `decay(x) = exp(-(x - threshold) / scale)`. The spin-coated base layer is
//! never modified.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::device::{peak_transconductance, total_capacitance, DeviceState, LayerOrigin, MaterialLayer, VgSweep};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Name of the random stream used for per-step thickness noise.
pub const EP_STREAM: &str = "ep";

/// Piecewise-linear table over potential. Queries outside the anchors fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct CalibrationTable {
    anchors: Vec<(f64, f64)>,
}

impl CalibrationTable {
    pub fn new(anchors: Vec<(f64, f64)>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::InvalidCalibration("table has no anchors".into()));
        }
        if anchors.iter().any(|(v, y)| !v.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidCalibration("non-finite anchor".into()));
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidCalibration("anchor potentials must be strictly increasing".into()));
        }
        Ok(Self { anchors })
    }

    pub fn constant(min_v: f64, max_v: f64, value: f64) -> Result<Self> {
        Self::new(vec![(min_v, value), (max_v, value)])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.anchors[0].0, self.anchors[self.anchors.len() - 1].0)
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn eval(&self, potential: f64) -> Result<f64> {
        let (min, max) = self.range();
        if !(potential >= min && potential <= max) {
            return Err(Error::UncalibratedPotential { potential, min, max });
        }
        let idx = self.anchors.partition_point(|&(v, _)| v < potential);
        match self.anchors.get(idx) {
            Some(&(v, y)) if v == potential => Ok(y),
            Some(&(v1, y1)) => {
                let (v0, y0) = self.anchors[idx - 1];
                let t = (potential - v0) / (v1 - v0);
                Ok(y0 + t * (y1 - y0))
            }
            None => unreachable!("potential checked against range"),
        }
    }

    fn min_value(&self) -> f64 {
        self.anchors.iter().map(|a| a.1).fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<(f64, f64)>> for CalibrationTable {
    type Error = Error;

    fn try_from(anchors: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(anchors)
    }
}

impl From<CalibrationTable> for Vec<(f64, f64)> {
    fn from(table: CalibrationTable) -> Self {
        table.anchors
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityDecay {
    pub enabled: bool,
    pub threshold_nm: f64,
    pub scale_nm: f64,
}

impl MobilityDecay {
    pub fn disabled() -> Self {
        Self { enabled: false, threshold_nm: f64::INFINITY, scale_nm: 1.0 }
    }

    /// Multiplier on EP-layer mobility at cumulative EP thickness `x_nm`.
    pub fn factor(&self, x_nm: f64) -> f64 {
        self.factor_ratio(self.threshold_nm.min(x_nm), x_nm)
    }

    /// `factor(to) / factor(from)` without forming either factor.
    fn factor_ratio(&self, from_nm: f64, to_nm: f64) -> f64 {
        if !self.enabled {
            return 1.0;
        }
        let excess = |x: f64| (x - self.threshold_nm).max(0.0);
        (-(excess(to_nm) - excess(from_nm)) / self.scale_nm).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthModel {
    pub reference_mobility_cm2_vs: f64,
    pub reference_vol_capacitance_f_cm3: f64,
    /// Relative standard deviation of per-step thickness.
    pub noise_sigma: f64,
    pub rate_nm_per_s: CalibrationTable,
    /// Deposited-layer mobility relative to the reference mobility.
    pub mobility_factor: CalibrationTable,
    /// Deposited-layer C* relative to the reference C*.
    pub cap_factor: CalibrationTable,
    pub grain_size_nm: CalibrationTable,
    pub roughness_nm: CalibrationTable,
    pub spin_coated_roughness_nm: f64,
    pub decay: MobilityDecay,
}

impl GrowthModel {
    /// Structural checks. Deliberately does not require
    /// `mobility_factor(0.6) > 1 > mobility_factor(0.7)` so that neutral
    /// models (factor 1 everywhere) can be built; the config loader checks
    /// that ordering for the shipped calibration.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.reference_mobility_cm2_vs) || !positive(self.reference_vol_capacitance_f_cm3) {
            return Err(Error::InvalidCalibration("reference material values must be > 0".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidCalibration(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        for (name, table) in [
            ("rate_nm_per_s", &self.rate_nm_per_s),
            ("mobility_factor", &self.mobility_factor),
            ("cap_factor", &self.cap_factor),
            ("grain_size_nm", &self.grain_size_nm),
            ("roughness_nm", &self.roughness_nm),
        ] {
            if table.min_value() <= 0.0 {
                return Err(Error::InvalidCalibration(format!("{name} values must be > 0")));
            }
        }
        if !positive(self.spin_coated_roughness_nm) {
            return Err(Error::InvalidCalibration("spin-coated roughness must be > 0".into()));
        }
        if self.decay.enabled && !(positive(self.decay.scale_nm) && self.decay.threshold_nm >= 0.0) {
            return Err(Error::InvalidCalibration("decay needs threshold >= 0 and scale > 0".into()));
        }
        Ok(())
    }

    pub fn deposition_rate(&self, potential: f64) -> Result<f64> {
        self.rate_nm_per_s.eval(potential)
    }

    pub fn morphology(&self, potential: f64) -> Result<MorphologyRecord> {
        Ok(MorphologyRecord {
            grain_size_nm: Some(self.grain_size_nm.eval(potential)?),
            roughness_nm: self.roughness_nm.eval(potential)?,
        })
    }

    pub fn spin_coated_morphology(&self) -> MorphologyRecord {
        MorphologyRecord { grain_size_nm: None, roughness_nm: self.spin_coated_roughness_nm }
    }

    /// Same model with every mobility factor replaced by `kappa`, no decay
    /// and no noise.
    pub fn with_uniform_mobility_factor(&self, kappa: f64) -> Result<Self> {
        let (min, max) = self.rate_nm_per_s.range();
        Ok(Self {
            mobility_factor: CalibrationTable::constant(min, max, kappa)?,
            decay: MobilityDecay::disabled(),
            noise_sigma: 0.0,
            ..self.clone()
        })
    }
}

/// Surface description of deposited material. Spin-coated films have no
/// granular structure, so `grain_size_nm` is `None` for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphologyRecord {
    pub grain_size_nm: Option<f64>,
    pub roughness_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpCondition {
    pub potential_v: f64,
    pub duration_s: f64,
}

impl EpCondition {
    /// A zero duration is accepted and acts as the identity step.
    pub fn new(potential_v: f64, duration_s: f64) -> Result<Self> {
        if !potential_v.is_finite() {
            return Err(Error::InvalidCondition(format!("potential must be finite, got {potential_v}")));
        }
        if !(duration_s >= 0.0 && duration_s.is_finite()) {
            return Err(Error::InvalidCondition(format!("duration must be >= 0, got {duration_s}")));
        }
        Ok(Self { potential_v, duration_s })
    }
}

pub fn deposition_rate(model: &GrowthModel, potential: f64) -> Result<f64> {
    model.deposition_rate(potential)
}

pub fn morphology(model: &GrowthModel, potential: f64) -> Result<MorphologyRecord> {
    model.morphology(potential)
}

/// Appends one electropolymerized layer. `rng` supplies the thickness noise.
pub fn apply_ep_step<R: Rng + ?Sized>(
    state: &DeviceState,
    cond: &EpCondition,
    model: &GrowthModel,
    rng: &mut R,
) -> Result<DeviceState> {
    let v = cond.potential_v;
    let rate = model.deposition_rate(v)?;
    let kappa = model.mobility_factor.eval(v)?;
    let cap_factor = model.cap_factor.eval(v)?;
    if cond.duration_s == 0.0 {
        return Ok(state.clone());
    }

    let eps = if model.noise_sigma > 0.0 {
        Normal::new(0.0, model.noise_sigma).map_err(|e| Error::InvalidCalibration(e.to_string()))?.sample(rng)
    } else {
        0.0
    };
    let thickness = rate * cond.duration_s * (1.0 + eps);
    if thickness <= 0.0 {
        return Ok(state.clone());
    }

    let before = state.ep_thickness_nm();
    let after = before + thickness;
    let degrade = model.decay.factor_ratio(before, after);

    let mut layers: Vec<MaterialLayer> = state
        .layers()
        .iter()
        .map(|layer| {
            if layer.origin.is_electropolymerized() {
                MaterialLayer { mobility_cm2_vs: layer.mobility_cm2_vs * degrade, ..*layer }
            } else {
                *layer
            }
        })
        .collect();
    layers.push(MaterialLayer::new(
        thickness,
        kappa * model.reference_mobility_cm2_vs * model.decay.factor(after),
        cap_factor * model.reference_vol_capacitance_f_cm3,
        LayerOrigin::Electropolymerized { potential_v: v },
    )?);
    Ok(state.with_layers(layers))
}

/// Applies `steps` identical EP steps, drawing step `i` from `stream`'s
/// [`EP_STREAM`] generator at index `first_step + i`.
pub fn apply_ep_sequence(
    state: &DeviceState,
    cond: &EpCondition,
    steps: usize,
    model: &GrowthModel,
    stream: &SeedStream,
    first_step: u64,
) -> Result<DeviceState> {
    let mut current = state.clone();
    for i in 0..steps as u64 {
        let mut rng = stream.rng(EP_STREAM, first_step + i);
        current = apply_ep_step(&current, cond, model, &mut rng)?;
    }
    Ok(current)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub ep_time_s: f64,
    /// `(Gm - Gm0) / Gm0` of the peak transconductance.
    pub gm_rel_change: f64,
    /// `(C - C0) / C0` of the total capacitance.
    pub cap_rel_change: f64,
}

/// Relative peak-Gm and capacitance changes after each of `n_steps` EP steps,
/// both referenced to `state0`.
#[allow(clippy::too_many_arguments)]
pub fn gm_capacitance_trajectory(
    state0: &DeviceState,
    cond: &EpCondition,
    n_steps: usize,
    vd: f64,
    sweep: &VgSweep,
    model: &GrowthModel,
    stream: &SeedStream,
) -> Result<Vec<TrajectoryPoint>> {
    if n_steps == 0 {
        return Err(Error::InvalidCondition("trajectory needs at least one step".into()));
    }
    let gm0 = peak_transconductance(state0, sweep, vd)?.gm_s;
    let c0 = total_capacitance(state0);
    let mut state = state0.clone();
    let mut points = Vec::with_capacity(n_steps);
    for step in 0..n_steps {
        let mut rng = stream.rng(EP_STREAM, step as u64);
        state = apply_ep_step(&state, cond, model, &mut rng)?;
        let gm = peak_transconductance(&state, sweep, vd)?.gm_s;
        let c = total_capacitance(&state);
        points.push(TrajectoryPoint {
            step: step + 1,
            ep_time_s: cond.duration_s * (step + 1) as f64,
            gm_rel_change: (gm - gm0) / gm0,
            cap_rel_change: (c - c0) / c0,
        });
    }
    Ok(points)
}
