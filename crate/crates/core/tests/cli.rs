use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use oect_core::eis::parse_spectrum_csv;
use oect_core::output::CsvTable;
use serde_json::Value;
use tempfile::TempDir;

fn oect(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oect")).args(args).arg("--out").arg(dir).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = oect(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

fn table(dir: &Path, name: &str) -> CsvTable {
    CsvTable::parse(&read(dir, name)).unwrap()
}

/// Manifest lists exactly the other files in the directory.
fn assert_manifest_complete(dir: &Path, command: &str) {
    let m = json(dir, "manifest.json");
    assert_eq!(m["command"], command);
    assert_eq!(m["toolkit_version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let listed: BTreeSet<String> =
        m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let present: BTreeSet<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, present);
}

fn peak_gm_per_step(t: &CsvTable) -> Vec<f64> {
    let steps = t.numeric_column("step").unwrap();
    let gm = t.numeric_column("gm_s").unwrap();
    let n = steps.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let mut peaks = vec![0.0f64; n];
    for (s, g) in steps.iter().zip(gm) {
        peaks[*s as usize] = peaks[*s as usize].max(g);
    }
    peaks
}

#[test]
fn transfer_curves() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("pristine");
    ok(&d, &["simulate-transfer"]);
    let peaks = peak_gm_per_step(&table(&d, "transfer.csv"));
    assert_eq!(peaks.len(), 1);
    assert!((peaks[0] / 0.4e-3 - 1.0).abs() < 0.01, "{peaks:?}");
    assert_manifest_complete(&d, "simulate-transfer");

    let d = tmp.path().join("grown");
    ok(&d, &["simulate-transfer", "--ep-schedule", "0.6V×2s×5"]);
    let t = table(&d, "transfer.csv");
    assert_eq!(t.header, ["step", "vg_v", "id_a", "gm_s"]);
    let peaks = peak_gm_per_step(&t);
    assert_eq!(peaks.len(), 6);
    assert!(peaks.windows(2).all(|w| w[1] >= w[0]));

    let out = oect(&tmp.path().join("empty"), &["simulate-transfer", "--vg-points", "0"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn eis_simulate_fit_round_trip() {
    let tmp = TempDir::new().unwrap();
    let sim = tmp.path().join("sim");
    ok(&sim, &["simulate-eis", "--rs", "500", "--rp", "5e4", "--cp", "1e-8"]);
    let spectrum = parse_spectrum_csv(&read(&sim, "spectrum.csv")).unwrap();
    assert_eq!(spectrum.len(), 61);
    assert_eq!(spectrum.metadata["v_dc_v"], "0.1");
    assert_eq!(spectrum.metadata["v_ac_v"], "0.02");
    assert_manifest_complete(&sim, "simulate-eis");

    let fit = tmp.path().join("fit");
    let input = sim.join("spectrum.csv");
    ok(&fit, &["fit-eis", "--input", input.to_str().unwrap()]);
    let r = json(&fit, "fit_report.json");
    for (key, truth) in [("rs_ohm", 500.0), ("rp_ohm", 5e4), ("cp_f", 1e-8)] {
        let got = r[key].as_f64().unwrap();
        assert!((got / truth - 1.0).abs() < 1e-3, "{key} {got}");
    }
    assert!(r["iterations"].as_u64().unwrap() <= 200);
    assert!(r["residual"].as_f64().is_some());
    assert_manifest_complete(&fit, "fit-eis");
}

#[test]
fn fit_eis_failures_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let header_only = tmp.path().join("h.csv");
    std::fs::write(&header_only, "freq_hz,z_real_ohm,z_imag_ohm\n").unwrap();
    let out = oect(&tmp.path().join("a"), &["fit-eis", "--input", header_only.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));

    let bad_row = tmp.path().join("b.csv");
    std::fs::write(&bad_row, "freq_hz,z_real_ohm,z_imag_ohm\n100,1,-1\n10,oops,-2\n").unwrap();
    let out = oect(&tmp.path().join("b"), &["fit-eis", "--input", bad_row.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let resistor = tmp.path().join("r.csv");
    let mut text = String::from("freq_hz,z_real_ohm,z_imag_ohm\n");
    for i in 0..31 {
        text.push_str(&format!("{},1000,0\n", 10f64.powf(5.0 - i as f64 / 10.0)));
    }
    std::fs::write(&resistor, text).unwrap();
    let out = oect(&tmp.path().join("c"), &["fit-eis", "--input", resistor.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains(&oect_core::Error::UnidentifiableSpectrum.to_string()));

    let out = oect(&tmp.path().join("d"), &["fit-eis", "--input", "/nonexistent/spectrum.csv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("/nonexistent/spectrum.csv"));
}

#[test]
fn high_potential_ep_nearly_doubles_fitted_capacitance() {
    let tmp = TempDir::new().unwrap();
    let mut cps = Vec::new();
    for (name, extra) in [("pre", vec![]), ("post", vec!["--ep-schedule", "0.7V×1.8s×4"])] {
        let sim = tmp.path().join(format!("{name}-sim"));
        let mut args = vec!["simulate-eis"];
        args.extend(extra);
        ok(&sim, &args);
        let fit = tmp.path().join(format!("{name}-fit"));
        ok(&fit, &["fit-eis", "--input", sim.join("spectrum.csv").to_str().unwrap()]);
        cps.push(json(&fit, "fit_report.json")["cp_f"].as_f64().unwrap());
    }
    let ratio = cps[1] / cps[0];
    assert!((ratio / 1.9 - 1.0).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn tune_array_reports() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let out = ok(&a, &["tune-array", "--n", "30", "--target-ms", "1", "--potential", "0.6"]);
    let r = json(&a, "tuning_report.json");
    let m = &r["summary"]["moments"];
    let mean = m["gm_after"]["mean"].as_f64().unwrap();
    let std = m["gm_after"]["std"].as_f64().unwrap();
    assert!((mean - 1e-3).abs() <= 0.05e-3 && std <= 0.10e-3, "{mean} {std}");
    // Some devices exhaust the budget and the command still succeeds.
    assert!(r["summary"]["budget"].as_u64().unwrap() > 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("devices reached target"));
    assert_eq!(table(&a, "gm_histogram.csv").rows.len(), 30);
    assert_eq!(table(&a, "capacitance_histogram.csv").numeric_column("capacitance_after_f").unwrap().len(), 30);
    assert_manifest_complete(&a, "tune-array");

    let b = tmp.path().join("b");
    ok(&b, &["tune-array", "--n", "30", "--target-ms", "1", "--potential", "0.6"]);
    for f in ["tuning_report.json", "gm_histogram.csv", "capacitance_histogram.csv", "manifest.json"] {
        assert_eq!(read(&a, f), read(&b, f), "{f} differs between runs");
    }

    let c = tmp.path().join("c");
    ok(&c, &["tune-array", "--n", "30", "--seed", "5"]);
    assert_ne!(read(&a, "tuning_report.json"), read(&c, "tuning_report.json"));
    assert_eq!(json(&c, "manifest.json")["seed"], 5);

    let one = tmp.path().join("one");
    ok(&one, &["tune-array", "--n", "1", "--mobility-spread", "0", "--capacitance-spread", "0", "--target-ms", "0.2"]);
    let r = json(&one, "tuning_report.json");
    assert_eq!(r["per_device"][0]["ep_time_s"].as_f64(), Some(0.0));

    for bad in ["0", "-1"] {
        let out = oect(&tmp.path().join("bad"), &["tune-array", "--target-ms", bad]);
        assert_eq!(code(&out), 1, "target {bad}");
    }
}

#[test]
fn pulse_train_spike_counts() {
    let tmp = TempDir::new().unwrap();
    let pre = tmp.path().join("pre");
    ok(&pre, &["pulse-train", "--frequency", "1000", "--n-pulses", "20"]);
    let r = json(&pre, "spike_report.json");
    assert_eq!(r["spikes"]["eligible"], 16);
    assert_eq!(r["spikes"]["count"], 16);
    let t = table(&pre, "trace.csv");
    assert_eq!(t.header, ["time_s", "response"]);
    assert!(t.numeric_column("response").unwrap().iter().all(|r| (0.0..=1.0).contains(r)));
    assert_manifest_complete(&pre, "pulse-train");

    let post = tmp.path().join("post");
    ok(&post, &["pulse-train", "--frequency", "8000", "--n-pulses", "20", "--ep-schedule", "0.7V×1.8s×4"]);
    assert_eq!(json(&post, "spike_report.json")["spikes"]["count"], 0);

    let slow = tmp.path().join("slow");
    ok(&slow, &["pulse-train", "--frequency", "1000", "--cp", "19e-9"]);
    assert_eq!(json(&slow, "spike_report.json")["spikes"]["count"], 0);

    assert_eq!(code(&oect(&tmp.path().join("x"), &["pulse-train", "--threshold", "1.5"])), 1);
    assert_eq!(code(&oect(&tmp.path().join("y"), &["pulse-train", "--frequency", "1000", "--width", "1e-3"])), 1);
}

#[test]
fn growth_and_trajectory_outputs() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("grow");
    ok(&g, &["ep-grow", "--ep-schedule", "0.6V×2s×4", "--no-noise"]);
    let layers = table(&g, "layers.csv");
    assert_eq!(layers.rows.len(), 5);
    let thick: f64 = layers.numeric_column("thickness_nm").unwrap()[1..].iter().sum();
    assert!((thick - 100.0).abs() < 1e-9);
    let steps = json(&g, "ep_report.json");
    assert_eq!(steps[4]["grain_size_nm"].as_f64(), Some(5.0));
    assert_eq!(steps[0]["roughness_nm"].as_f64(), Some(3.0));
    assert_manifest_complete(&g, "ep-grow");

    let t = tmp.path().join("traj");
    ok(&t, &["trajectory", "--potential", "0.7", "--steps", "5"]);
    let traj = table(&t, "trajectory.csv");
    let dg = traj.numeric_column("gm_rel_change").unwrap();
    let dc = traj.numeric_column("cap_rel_change").unwrap();
    assert_eq!(dg.len(), 5);
    assert!(dg.iter().zip(&dc).all(|(g, c)| g < c));
    assert_manifest_complete(&t, "trajectory");
}

#[test]
fn config_file_and_usage_errors() {
    let tmp = TempDir::new().unwrap();
    let mut text = oect_core::ToolkitConfig::default().to_toml_string();
    text = text.replacen("seed = 20220601", "seed = 7", 1);
    let path = tmp.path().join("cfg.toml");
    std::fs::write(&path, &text).unwrap();
    let d = tmp.path().join("cfg");
    ok(&d, &["--config", path.to_str().unwrap(), "trajectory"]);
    assert_eq!(json(&d, "manifest.json")["seed"], 7);

    std::fs::write(&path, format!("{text}\n[extra]\nkey = 1\n")).unwrap();
    let out = oect(&tmp.path().join("bad"), &["--config", path.to_str().unwrap(), "trajectory"]);
    assert_eq!(code(&out), 2);

    assert_eq!(code(&oect(&tmp.path().join("u"), &["no-such-verb"])), 1);
    assert_eq!(code(&oect(&tmp.path().join("v"), &["simulate-eis", "--rs", "-5"])), 1);
    let help = Command::new(env!("CARGO_BIN_EXE_oect")).arg("--help").output().unwrap();
    assert_eq!(code(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("tune-array"));
}
