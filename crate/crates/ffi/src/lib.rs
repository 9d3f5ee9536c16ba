//! C ABI over `oect-core`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every function returns an [`OectStatus`]; on failure
//! [`oect_last_error`] describes the problem for the calling thread.
//! Outputs are written through pointer arguments only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use oect_core::device::{self, DeviceState};
use oect_core::eis::{self, CircuitParams, FrequencyGrid, ImpedancePoint, ImpedanceSpectrum};
use oect_core::growth::{apply_ep_step, EpCondition, EP_STREAM};
use oect_core::rng::SeedStream;
use oect_core::transient::{simulate_pulse_train, spike_report, PulseTrainSpec};
use oect_core::{Error, ToolkitConfig};

/// Toolkit configuration handle.
pub struct OectConfig(ToolkitConfig);

/// Immutable device-state handle.
pub struct OectDevice(DeviceState);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OectStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Parse = 4,
    Panic = 5,
}

/// `Rs + (Rp || Cp)` component values in ohm, ohm and farad.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OectCircuit {
    pub rs: f64,
    pub rp: f64,
    pub cp: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let message = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn status_of(e: &Error) -> OectStatus {
    match e {
        e if e.is_numerical() => OectStatus::Numerical,
        Error::Parse { .. } | Error::Config(_) | Error::Io(_) => OectStatus::Parse,
        _ => OectStatus::InvalidArgument,
    }
}

struct Failure(OectStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OectStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OectStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            OectStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            OectStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message describing the last failure on this thread; empty after success.
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn oect_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oect_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Bundled default configuration.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn oect_config_default(out: *mut *mut OectConfig) -> OectStatus {
    guard(|| {
        let handle = Box::into_raw(Box::new(OectConfig(ToolkitConfig::default())));
        write(out, handle, "out").inspect_err(|_| drop(Box::from_raw(handle)))
    })
}

/// Parses a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_config_from_toml(toml: *const c_char, out: *mut *mut OectConfig) -> OectStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Failure(OectStatus::Parse, format!("config is not UTF-8: {e}")))?;
        let config = ToolkitConfig::from_toml_str(text)?;
        out.write(Box::into_raw(Box::new(OectConfig(config))));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oect_config_free(config: *mut OectConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Pristine (spin-coated only) device from the configuration.
///
/// # Safety
/// `config` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_pristine(config: *const OectConfig, out: *mut *mut OectDevice) -> OectStatus {
    guard(|| {
        let config = deref(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let state = config.0.pristine_device()?;
        out.write(Box::into_raw(Box::new(OectDevice(state))));
        Ok(())
    })
}

/// # Safety
/// `device` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn oect_device_free(device: *mut OectDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Total capacitance in farad.
///
/// # Safety
/// `device` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_capacitance(device: *const OectDevice, out: *mut f64) -> OectStatus {
    guard(|| {
        let device = deref(device, "device")?;
        write(out, device::total_capacitance(&device.0), "out")
    })
}

/// Drain current in ampere at (`vg`, `vd`); `vd` must be <= 0.
///
/// # Safety
/// `device` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_drain_current(
    device: *const OectDevice,
    vg: f64,
    vd: f64,
    out: *mut f64,
) -> OectStatus {
    guard(|| {
        let device = deref(device, "device")?;
        write(out, device::drain_current(&device.0, vg, vd)?, "out")
    })
}

/// Transconductance in siemens at (`vg`, `vd`).
///
/// # Safety
/// `device` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_transconductance(
    device: *const OectDevice,
    vg: f64,
    vd: f64,
    out: *mut f64,
) -> OectStatus {
    guard(|| {
        let device = deref(device, "device")?;
        write(out, device::transconductance(&device.0, vg, vd)?, "out")
    })
}

/// Peak transconductance over the configuration's gate sweep and drain bias.
///
/// # Safety
/// Handles must be live; `out_gm` and `out_vg` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_peak_gm(
    device: *const OectDevice,
    config: *const OectConfig,
    out_gm: *mut f64,
    out_vg: *mut f64,
) -> OectStatus {
    guard(|| {
        let device = deref(device, "device")?;
        let config = deref(config, "config")?;
        if out_gm.is_null() || out_vg.is_null() {
            return Err(null("output"));
        }
        let peak = device::peak_transconductance(&device.0, &config.0.sweep()?, config.0.policy.vd_v)?;
        out_gm.write(peak.gm_s);
        out_vg.write(peak.vg_v);
        Ok(())
    })
}

/// One electropolymerization step. Thickness noise is drawn from the stream
/// identified by (`seed`, `device_index`, `step`). The input handle is left
/// untouched; the grown device is returned as a new handle.
///
/// # Safety
/// Handles must be live; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_device_apply_ep_step(
    device: *const OectDevice,
    config: *const OectConfig,
    potential_v: f64,
    duration_s: f64,
    seed: u64,
    device_index: u64,
    step: u64,
    out: *mut *mut OectDevice,
) -> OectStatus {
    guard(|| {
        let device = deref(device, "device")?;
        let config = deref(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cond = EpCondition::new(potential_v, duration_s)?;
        let mut rng = SeedStream::new(seed, device_index).rng(EP_STREAM, step);
        let next = apply_ep_step(&device.0, &cond, &config.0.growth, &mut rng)?;
        out.write(Box::into_raw(Box::new(OectDevice(next))));
        Ok(())
    })
}

/// Impedance of `circuit` at `n` frequencies (Hz), written to `out_re` and
/// `out_im` (ohm).
///
/// # Safety
/// All arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn oect_eis_simulate(
    circuit: OectCircuit,
    freqs_hz: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> OectStatus {
    guard(|| {
        let params = CircuitParams::new(circuit.rs, circuit.rp, circuit.cp)?;
        let freqs = slice(freqs_hz, n, "freqs_hz")?;
        let grid = FrequencyGrid::new(freqs.to_vec(), 0)?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        for (i, p) in eis::simulate_spectrum(&params, &grid).points.iter().enumerate() {
            out_re.add(i).write(p.re_ohm);
            out_im.add(i).write(p.im_ohm);
        }
        Ok(())
    })
}

/// Fits `Rs + (Rp || Cp)` to `n` impedance points. `guess` may be null.
///
/// # Safety
/// Input arrays must hold `n` elements; `out` and `out_residual` must be
/// valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_eis_fit(
    freqs_hz: *const f64,
    re_ohm: *const f64,
    im_ohm: *const f64,
    n: usize,
    guess: *const OectCircuit,
    out: *mut OectCircuit,
    out_residual: *mut f64,
) -> OectStatus {
    guard(|| {
        let f = slice(freqs_hz, n, "freqs_hz")?;
        let re = slice(re_ohm, n, "re_ohm")?;
        let im = slice(im_ohm, n, "im_ohm")?;
        if out.is_null() || out_residual.is_null() {
            return Err(null("output"));
        }
        let points = (0..n).map(|i| ImpedancePoint { freq_hz: f[i], re_ohm: re[i], im_ohm: im[i] }).collect();
        let spectrum = ImpedanceSpectrum::new(points)?;
        let guess = match guess.as_ref() {
            Some(g) => Some(CircuitParams::new(g.rs, g.rp, g.cp)?),
            None => None,
        };
        let report = eis::fit_circuit(&spectrum, guess)?;
        out.write(OectCircuit { rs: report.params.rs, rp: report.params.rp, cp: report.params.cp });
        out_residual.write(report.residual);
        Ok(())
    })
}

/// Spike count of a pulse train through an RC stage with `tau = rs * cp`,
/// skipping the configured leading fraction of pulses.
///
/// # Safety
/// `config` must be a live handle; `out` must be valid for writing.
#[no_mangle]
pub unsafe extern "C" fn oect_pulse_spike_count(
    config: *const OectConfig,
    rs_ohm: f64,
    cp_f: f64,
    frequency_hz: f64,
    n_pulses: usize,
    threshold: f64,
    out: *mut usize,
) -> OectStatus {
    guard(|| {
        let config = deref(config, "config")?;
        let t = &config.0.transient;
        let spec = PulseTrainSpec::new(t.amplitude_v, t.width_s, frequency_hz, n_pulses)?;
        let trace = simulate_pulse_train(rs_ohm, cp_f, &spec, t.samples_per_segment)?;
        let report = spike_report(&trace, threshold, t.skip_fraction)?;
        write(out, report.count, "out")
    })
}
