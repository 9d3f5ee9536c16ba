//! `oect` command-line front end.
//!
//! Every command is a pure function of (config, flags, seed) and writes its
//! files plus a `manifest.json` listing them into `--out`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::adapt::{tune_array, ArraySpec};
use crate::config::ToolkitConfig;
use crate::device::{
    drain_current, peak_transconductance, total_capacitance, transconductance, DeviceState, LayerOrigin, VgSweep,
};
use crate::eis::{
    fit_circuit, parse_spectrum_csv, simulate_spectrum, write_spectrum_csv, CircuitParams, FitReport, FrequencyGrid,
    ImpedancePoint, ImpedanceSpectrum,
};
use crate::error::Error;
use crate::growth::{apply_ep_step, gm_capacitance_trajectory, EpCondition, EP_STREAM};
use crate::output::{fmt_num, OutputDir, RunManifest};
use crate::rng::SeedStream;
use crate::schedule::EpSchedule;
use crate::transient::{modulation_depth, simulate_pulse_train, spike_report, PulseTrainSpec, SpikeReport};

#[derive(Debug, Parser)]
#[command(name = "oect", version, about = "OECT electropolymerization tuning toolkit")]
pub struct Cli {
    /// Toolkit config (TOML). Defaults to the bundled calibration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transfer curves (Vg, Id, Gm), one per EP step.
    SimulateTransfer(TransferArgs),
    /// Impedance spectrum of the device's equivalent circuit.
    SimulateEis(EisArgs),
    /// Fit Rs + (Rp || Cp) to a spectrum CSV.
    FitEis(FitArgs),
    /// Apply an EP schedule and report the resulting layer stack.
    EpGrow(GrowArgs),
    /// Closed-loop Gm tuning of a device array.
    TuneArray(TuneArgs),
    /// Pulse-train response and spike counting.
    PulseTrain(PulseArgs),
    /// Relative Gm vs capacitance changes along repeated EP steps.
    Trajectory(TrajectoryArgs),
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub vg_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub vg_stop: Option<f64>,
    #[arg(long)]
    pub vg_points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub vd: Option<f64>,
    /// e.g. `0.6V×2s×5`
    #[arg(long)]
    pub ep_schedule: Option<String>,
}

#[derive(Debug, Args)]
pub struct EisArgs {
    #[arg(long)]
    pub ep_schedule: Option<String>,
    #[arg(long)]
    pub rs: Option<f64>,
    #[arg(long)]
    pub rp: Option<f64>,
    /// Overrides the device capacitance (F).
    #[arg(long)]
    pub cp: Option<f64>,
    #[arg(long)]
    pub f_start: Option<f64>,
    #[arg(long)]
    pub f_stop: Option<f64>,
    #[arg(long)]
    pub points_per_decade: Option<usize>,
    /// Relative std of multiplicative Gaussian noise on Re and Im.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct GrowArgs {
    #[arg(long, default_value = "0.6V×2s×5")]
    pub ep_schedule: String,
    /// Disable thickness noise.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub target_ms: Option<f64>,
    #[arg(long)]
    pub potential: Option<f64>,
    #[arg(long)]
    pub mobility_spread: Option<f64>,
    #[arg(long)]
    pub capacitance_spread: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PulseArgs {
    #[arg(long, default_value_t = 1000.0)]
    pub frequency: f64,
    #[arg(long, default_value_t = 20)]
    pub n_pulses: usize,
    /// Overrides the device capacitance (F).
    #[arg(long)]
    pub cp: Option<f64>,
    #[arg(long)]
    pub ep_schedule: Option<String>,
    #[arg(long)]
    pub rs: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub width: Option<f64>,
    #[arg(long)]
    pub skip_fraction: Option<f64>,
    #[arg(long)]
    pub samples_per_segment: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[arg(long, default_value_t = 0.6)]
    pub potential: f64,
    #[arg(long, default_value_t = 5)]
    pub steps: usize,
    #[arg(long, default_value_t = 2.0)]
    pub step_duration: f64,
    /// Disable thickness noise.
    #[arg(long)]
    pub no_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 1,
    Data = 2,
    Numerical = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub status: ExitStatus,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { status: ExitStatus::Usage, message: message.into() }
    }

    fn data(e: Error) -> Self {
        if e.is_numerical() {
            return e.into();
        }
        Self { status: ExitStatus::Data, message: e.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match &e {
            e if e.is_numerical() => ExitStatus::Numerical,
            Error::Parse { .. } | Error::Config(_) | Error::Io(_) => ExitStatus::Data,
            _ => ExitStatus::Usage,
        };
        Self { status, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub struct RunOutput {
    pub manifest: RunManifest,
    pub summary: String,
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<RunOutput> {
    let mut config = match &cli.config {
        Some(path) => ToolkitConfig::load(path).map_err(CliError::data)?,
        None => ToolkitConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut out = OutputDir::create(&cli.out).map_err(CliError::data)?;
    let (name, summary) = match &cli.command {
        Command::SimulateTransfer(a) => ("simulate-transfer", simulate_transfer(&config, a, &mut out)?),
        Command::SimulateEis(a) => ("simulate-eis", simulate_eis(&config, a, &mut out)?),
        Command::FitEis(a) => ("fit-eis", fit_eis(a, &mut out)?),
        Command::EpGrow(a) => ("ep-grow", ep_grow(&config, a, &mut out)?),
        Command::TuneArray(a) => ("tune-array", tune(&config, a, &mut out)?),
        Command::PulseTrain(a) => ("pulse-train", pulse_train(&config, a, &mut out)?),
        Command::Trajectory(a) => ("trajectory", trajectory(&config, a, &mut out)?),
    };
    let manifest = out.finish(name, config.hash(), config.seed).map_err(CliError::data)?;
    Ok(RunOutput { manifest, summary })
}

fn parse_schedule(text: &str) -> CliResult<EpSchedule> {
    text.parse::<EpSchedule>().map_err(|e| CliError::usage(e.to_string()))
}

/// Device states after each step of `schedule`, starting with the pristine
/// device. Step `i` draws its noise from stream `(seed, device 0)` index `i`.
fn grow(config: &ToolkitConfig, schedule: Option<&EpSchedule>) -> CliResult<Vec<DeviceState>> {
    let mut states = vec![config.pristine_device()?];
    if let Some(schedule) = schedule {
        let stream = SeedStream::new(config.seed, 0);
        for (i, cond) in schedule.steps().enumerate() {
            let mut rng = stream.rng(EP_STREAM, i as u64);
            let next = apply_ep_step(states.last().expect("non-empty"), &cond, &config.growth, &mut rng)?;
            states.push(next);
        }
    }
    Ok(states)
}

fn simulate_transfer(config: &ToolkitConfig, a: &TransferArgs, out: &mut OutputDir) -> CliResult<String> {
    let p = &config.policy;
    let sweep = VgSweep::new(
        a.vg_start.unwrap_or(p.vg_start_v),
        a.vg_stop.unwrap_or(p.vg_stop_v),
        a.vg_points.unwrap_or(p.vg_points),
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    let vd = a.vd.unwrap_or(p.vd_v);
    if vd > 0.0 {
        return Err(CliError::usage(format!("--vd must be <= 0, got {vd}")));
    }
    let schedule = a.ep_schedule.as_deref().map(parse_schedule).transpose()?;
    let states = grow(config, schedule.as_ref())?;

    let mut csv = String::from("step,vg_v,id_a,gm_s\n");
    let mut summary = String::new();
    for (step, state) in states.iter().enumerate() {
        for vg in sweep.voltages() {
            let id = drain_current(state, vg, vd)?;
            let gm = transconductance(state, vg, vd)?;
            writeln!(csv, "{step},{},{},{}", fmt_num(vg), fmt_num(id), fmt_num(gm)).unwrap();
        }
        let peak = peak_transconductance(state, &sweep, vd)?;
        writeln!(summary, "step {step}: peak Gm {:.4} mS at Vg {:.3} V", peak.gm_s * 1e3, peak.vg_v).unwrap();
    }
    out.write("transfer.csv", &csv)?;
    Ok(summary)
}

fn simulate_eis(config: &ToolkitConfig, a: &EisArgs, out: &mut OutputDir) -> CliResult<String> {
    let schedule = a.ep_schedule.as_deref().map(parse_schedule).transpose()?;
    let states = grow(config, schedule.as_ref())?;
    let state = states.last().expect("non-empty");
    let cp = a.cp.unwrap_or_else(|| total_capacitance(state));
    let params = CircuitParams::new(a.rs.unwrap_or(config.circuit.rs_ohm), a.rp.unwrap_or(config.circuit.rp_ohm), cp)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let grid = FrequencyGrid::log_spaced(
        a.f_start.unwrap_or(config.eis.f_start_hz),
        a.f_stop.unwrap_or(config.eis.f_stop_hz),
        a.points_per_decade.unwrap_or(config.eis.points_per_decade),
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        return Err(CliError::usage(format!("--noise must be >= 0, got {}", a.noise)));
    }
    let mut spectrum = simulate_spectrum(&params, &grid);
    if a.noise > 0.0 {
        spectrum = add_multiplicative_noise(&spectrum, a.noise, &SeedStream::new(config.seed, 0))?;
    }
    let spectrum = spectrum
        .with_metadata("source", "simulate-eis")
        .with_metadata("rs_ohm", fmt_num(params.rs))
        .with_metadata("rp_ohm", fmt_num(params.rp))
        .with_metadata("cp_f", fmt_num(params.cp))
        .with_metadata("v_dc_v", "0.1")
        .with_metadata("v_ac_v", "0.02")
        .with_metadata("noise_rel", fmt_num(a.noise));
    out.write("spectrum.csv", &write_spectrum_csv(&spectrum))?;
    Ok(format!(
        "simulated {} points, Rs {:.4e} ohm, Rp {:.4e} ohm, Cp {:.4e} F\n",
        spectrum.len(),
        params.rs,
        params.rp,
        params.cp
    ))
}

/// Independent `(1 + sigma z)` factors on the real and imaginary parts.
pub fn add_multiplicative_noise(
    spectrum: &ImpedanceSpectrum,
    sigma: f64,
    stream: &SeedStream,
) -> crate::Result<ImpedanceSpectrum> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidCircuit(e.to_string()))?;
    let mut rng = stream.rng("eis-noise", 0);
    let points = spectrum
        .points
        .iter()
        .map(|p| ImpedancePoint {
            freq_hz: p.freq_hz,
            re_ohm: p.re_ohm * (1.0 + normal.sample(&mut rng)),
            im_ohm: p.im_ohm * (1.0 + normal.sample(&mut rng)),
        })
        .collect();
    Ok(ImpedanceSpectrum { points, metadata: spectrum.metadata.clone() })
}

#[derive(Serialize)]
struct FitFileReport<'a> {
    input: String,
    rs_ohm: f64,
    rp_ohm: f64,
    cp_f: f64,
    residual: f64,
    iterations: usize,
    metadata: &'a std::collections::BTreeMap<String, String>,
}

fn fit_eis(a: &FitArgs, out: &mut OutputDir) -> CliResult<String> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| CliError {
        status: ExitStatus::Data,
        message: format!("cannot read {}: {e}", a.input.display()),
    })?;
    let spectrum = parse_spectrum_csv(&text).map_err(CliError::data)?;
    let FitReport { params, residual, iterations, .. } = fit_circuit(&spectrum, None).map_err(CliError::data)?;
    out.write_json(
        "fit_report.json",
        &FitFileReport {
            input: a.input.display().to_string(),
            rs_ohm: params.rs,
            rp_ohm: params.rp,
            cp_f: params.cp,
            residual,
            iterations,
            metadata: &spectrum.metadata,
        },
    )?;
    Ok(format!(
        "Rs {:.6e} ohm, Rp {:.6e} ohm, Cp {:.6e} F, residual {:.3e}, {} iterations\n",
        params.rs, params.rp, params.cp, residual, iterations
    ))
}

#[derive(Serialize)]
struct GrowStep {
    step: usize,
    potential_v: Option<f64>,
    duration_s: Option<f64>,
    ep_thickness_nm: f64,
    capacitance_f: f64,
    peak_gm_s: f64,
    grain_size_nm: Option<f64>,
    roughness_nm: f64,
}

fn ep_grow(config: &ToolkitConfig, a: &GrowArgs, out: &mut OutputDir) -> CliResult<String> {
    let schedule = parse_schedule(&a.ep_schedule)?;
    let mut config = config.clone();
    if a.no_noise {
        config.growth.noise_sigma = 0.0;
    }
    let states = grow(&config, Some(&schedule))?;
    let sweep = config.sweep()?;
    let conds: Vec<EpCondition> = schedule.steps().collect();
    let mut steps = Vec::with_capacity(states.len());
    for (i, state) in states.iter().enumerate() {
        let cond = i.checked_sub(1).map(|j| conds[j]);
        let morph = match cond {
            Some(c) => config.growth.morphology(c.potential_v)?,
            None => config.growth.spin_coated_morphology(),
        };
        steps.push(GrowStep {
            step: i,
            potential_v: cond.map(|c| c.potential_v),
            duration_s: cond.map(|c| c.duration_s),
            ep_thickness_nm: state.ep_thickness_nm(),
            capacitance_f: total_capacitance(state),
            peak_gm_s: peak_transconductance(state, &sweep, config.policy.vd_v)?.gm_s,
            grain_size_nm: morph.grain_size_nm,
            roughness_nm: morph.roughness_nm,
        });
    }
    let last = states.last().expect("non-empty");
    let mut csv = String::from("layer,origin,potential_v,thickness_nm,mobility_cm2_vs,vol_capacitance_f_cm3\n");
    for (i, layer) in last.layers().iter().enumerate() {
        let (origin, potential) = match layer.origin {
            LayerOrigin::SpinCoated => ("spin_coated", String::new()),
            LayerOrigin::Electropolymerized { potential_v } => ("electropolymerized", fmt_num(potential_v)),
        };
        writeln!(
            csv,
            "{i},{origin},{potential},{},{},{}",
            fmt_num(layer.thickness_nm),
            fmt_num(layer.mobility_cm2_vs),
            fmt_num(layer.vol_capacitance_f_cm3)
        )
        .unwrap();
    }
    out.write("layers.csv", &csv)?;
    out.write_json("ep_report.json", &steps)?;
    let last_step = steps.last().expect("non-empty");
    Ok(format!(
        "{} steps, EP thickness {:.2} nm, C {:.4} nF, peak Gm {:.4} mS\n",
        schedule.len(),
        last_step.ep_thickness_nm,
        last_step.capacitance_f * 1e9,
        last_step.peak_gm_s * 1e3
    ))
}

fn tune(config: &ToolkitConfig, a: &TuneArgs, out: &mut OutputDir) -> CliResult<String> {
    let mut policy = config.tuning_policy()?;
    if let Some(target) = a.target_ms {
        if !(target > 0.0 && target.is_finite()) {
            return Err(CliError::usage(format!("--target-ms must be > 0, got {target}")));
        }
        policy.target_gm_s = target * 1e-3;
    }
    if let Some(v) = a.potential {
        policy.ep_potential_v = v;
    }
    let spec = ArraySpec::new(
        a.n.unwrap_or(config.array.n_devices),
        a.mobility_spread.unwrap_or(config.array.mobility_spread),
        a.capacitance_spread.unwrap_or(config.array.capacitance_spread),
        config.seed,
    )
    .map_err(|e| CliError::usage(e.to_string()))?;
    let report = tune_array(&config.pristine_device()?, &spec, &policy, &config.growth)?;

    let mut gm_csv = String::from("device,gm_before_s,gm_after_s,status\n");
    let mut cap_csv = String::from("device,capacitance_before_f,capacitance_after_f\n");
    for d in &report.per_device {
        let status = match d.status {
            crate::adapt::TuneStatus::Reached => "reached",
            crate::adapt::TuneStatus::Budget => "budget",
        };
        writeln!(gm_csv, "{},{},{},{status}", d.index, fmt_num(d.initial_gm_s), fmt_num(d.final_gm_s)).unwrap();
        writeln!(cap_csv, "{},{},{}", d.index, fmt_num(d.initial_capacitance_f), fmt_num(d.final_capacitance_f))
            .unwrap();
    }
    out.write_json("tuning_report.json", &report)?;
    out.write("gm_histogram.csv", &gm_csv)?;
    out.write("capacitance_histogram.csv", &cap_csv)?;
    let m = &report.summary.moments;
    Ok(format!(
        "{}/{} devices reached target; Gm {:.4} ± {:.4} mS -> {:.4} ± {:.4} mS; C std {:.4} -> {:.4} nF\n",
        report.summary.reached,
        report.summary.n_devices,
        m.gm_before.mean * 1e3,
        m.gm_before.std * 1e3,
        m.gm_after.mean * 1e3,
        m.gm_after.std * 1e3,
        m.capacitance_before.std * 1e9,
        m.capacitance_after.std * 1e9
    ))
}

#[derive(Serialize)]
struct PulseReport {
    rs_ohm: f64,
    cp_f: f64,
    tau_s: f64,
    frequency_hz: f64,
    width_s: f64,
    amplitude_v: f64,
    n_pulses: usize,
    modulation_depth: Option<f64>,
    spikes: SpikeReport,
}

fn pulse_train(config: &ToolkitConfig, a: &PulseArgs, out: &mut OutputDir) -> CliResult<String> {
    let t = &config.transient;
    let threshold = a.threshold.unwrap_or(t.threshold);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CliError::usage(format!("--threshold must be in (0, 1), got {threshold}")));
    }
    let skip = a.skip_fraction.unwrap_or(t.skip_fraction);
    if !(0.0..1.0).contains(&skip) {
        return Err(CliError::usage(format!("--skip-fraction must be in [0, 1), got {skip}")));
    }
    let spec = PulseTrainSpec::new(t.amplitude_v, a.width.unwrap_or(t.width_s), a.frequency, a.n_pulses)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let schedule = a.ep_schedule.as_deref().map(parse_schedule).transpose()?;
    if a.cp.is_some() && schedule.is_some() {
        return Err(CliError::usage("--cp and --ep-schedule are mutually exclusive"));
    }
    let cp = match a.cp {
        Some(cp) => cp,
        None => total_capacitance(grow(config, schedule.as_ref())?.last().expect("non-empty")),
    };
    let rs = a.rs.unwrap_or(t.rs_ohm);
    let samples = a.samples_per_segment.unwrap_or(t.samples_per_segment);
    let trace = simulate_pulse_train(rs, cp, &spec, samples).map_err(|e| CliError::usage(e.to_string()))?;
    let spikes = spike_report(&trace, threshold, skip)?;
    let depth = modulation_depth(&trace).ok();

    let mut csv = String::from("time_s,response\n");
    for s in trace.samples() {
        writeln!(csv, "{},{}", fmt_num(s.time_s), fmt_num(s.response)).unwrap();
    }
    out.write("trace.csv", &csv)?;
    let summary = format!(
        "tau {:.4e} s, modulation depth {}, spikes {}/{} counted pulses (threshold {threshold})\n",
        rs * cp,
        depth.map_or("n/a".to_string(), |d| format!("{d:.4}")),
        spikes.count,
        spikes.eligible
    );
    out.write_json(
        "spike_report.json",
        &PulseReport {
            rs_ohm: rs,
            cp_f: cp,
            tau_s: rs * cp,
            frequency_hz: spec.frequency_hz,
            width_s: spec.width_s,
            amplitude_v: spec.amplitude_v,
            n_pulses: spec.n_pulses,
            modulation_depth: depth,
            spikes,
        },
    )?;
    Ok(summary)
}

fn trajectory(config: &ToolkitConfig, a: &TrajectoryArgs, out: &mut OutputDir) -> CliResult<String> {
    if a.steps == 0 {
        return Err(CliError::usage("--steps must be >= 1"));
    }
    let cond = EpCondition::new(a.potential, a.step_duration).map_err(|e| CliError::usage(e.to_string()))?;
    let mut model = config.growth.clone();
    if a.no_noise {
        model.noise_sigma = 0.0;
    }
    let points = gm_capacitance_trajectory(
        &config.pristine_device()?,
        &cond,
        a.steps,
        config.policy.vd_v,
        &config.sweep()?,
        &model,
        &SeedStream::new(config.seed, 0),
    )?;
    let mut csv = String::from("step,ep_time_s,gm_rel_change,cap_rel_change\n");
    for p in &points {
        writeln!(csv, "{},{},{},{}", p.step, fmt_num(p.ep_time_s), fmt_num(p.gm_rel_change), fmt_num(p.cap_rel_change))
            .unwrap();
    }
    out.write("trajectory.csv", &csv)?;
    let last = points.last().expect("non-empty");
    Ok(format!("after {} steps: dGm/Gm0 {:.4}, dC/C0 {:.4}\n", last.step, last.gm_rel_change, last.cap_rel_change))
}
