mod common;

use oect_core::adapt::{tune_device, TuningPolicy};
use oect_core::config::ToolkitConfig;
use oect_core::eis::{
    bode, fit_circuit, nyquist, parse_spectrum_csv, simulate_spectrum, slope_in_band, write_spectrum_csv,
    CircuitParams, FrequencyGrid, ImpedancePoint, ImpedanceSpectrum,
};
use oect_core::rng::SeedStream;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn grid() -> FrequencyGrid {
    FrequencyGrid::log_spaced(1e6, 1.0, 10).unwrap()
}

fn max_rel_err(fit: &CircuitParams, truth: &CircuitParams) -> f64 {
    [(fit.rs, truth.rs), (fit.rp, truth.rp), (fit.cp, truth.cp)]
        .iter()
        .map(|(a, b)| ((a - b) / b).abs())
        .fold(0.0, f64::max)
}

fn noisy(spectrum: &ImpedanceSpectrum, sigma: f64, seed: u64) -> ImpedanceSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let points = spectrum
        .points
        .iter()
        .map(|p| ImpedancePoint {
            freq_hz: p.freq_hz,
            re_ohm: p.re_ohm * (1.0 + n.sample(&mut rng)),
            im_ohm: p.im_ohm * (1.0 + n.sample(&mut rng)),
        })
        .collect();
    ImpedanceSpectrum::new(points).unwrap()
}

#[test]
fn simulated_points_match_closed_form() {
    let p = CircuitParams::new(500.0, 5e4, 1e-8).unwrap();
    for pt in simulate_spectrum(&p, &grid()).points {
        let (re, im) = common::impedance(500.0, 5e4, 1e-8, pt.freq_hz);
        assert!((pt.re_ohm - re).abs() <= 1e-12 * re.abs());
        assert!((pt.im_ohm - im).abs() <= 1e-12 * im.abs().max(1e-300));
    }
}

#[test]
fn limits_and_apex() {
    let p = CircuitParams::new(500.0, 5e4, 1e-8).unwrap();
    let low = p.impedance(1e-6);
    assert!((low.norm() / 50_500.0 - 1.0).abs() < 1e-6 && low.arg().to_degrees().abs() < 1e-3);
    let high = p.impedance(1e12);
    assert!((high.norm() / 500.0 - 1.0).abs() < 1e-6 && high.arg().to_degrees().abs() < 1e-3);
    let apex = p.impedance(p.apex_frequency());
    assert!((apex.im + 2.5e4).abs() < 1e-6 && (apex.re - 25_500.0).abs() < 1e-6);
}

#[test]
fn bode_and_nyquist_of_simple_entries() {
    let s = ImpedanceSpectrum::new(vec![
        ImpedancePoint { freq_hz: 1.0, re_ohm: 100.0, im_ohm: 0.0 },
        ImpedancePoint { freq_hz: 2.0, re_ohm: 0.0, im_ohm: -50.0 },
    ])
    .unwrap();
    let b = bode(&s);
    assert_eq!((b[0].modulus_ohm, b[0].phase_deg), (100.0, 0.0));
    assert_eq!(b[1].phase_deg, -90.0);
    assert_eq!(nyquist(&s), vec![(100.0, -0.0), (0.0, 50.0)]);
}

#[test]
fn slopes_of_pure_elements() {
    let g = grid();
    let cap = ImpedanceSpectrum::new(
        g.frequencies()
            .iter()
            .map(|&f| ImpedancePoint {
                freq_hz: f,
                re_ohm: 0.0,
                im_ohm: -1.0 / (2.0 * std::f64::consts::PI * f * 1e-8),
            })
            .collect(),
    )
    .unwrap();
    assert!((slope_in_band(&cap, 1.0, 1e6).unwrap() + 1.0).abs() < 1e-6);
    let res = ImpedanceSpectrum::new(
        g.frequencies().iter().map(|&f| ImpedancePoint { freq_hz: f, re_ohm: 1e3, im_ohm: 0.0 }).collect(),
    )
    .unwrap();
    assert!(slope_in_band(&res, 1.0, 1e6).unwrap().abs() < 1e-6);
}

#[test]
fn calibrated_device_slope_matches_closed_form() {
    let c = ToolkitConfig::default();
    let cp = oect_core::device::total_capacitance(&c.pristine_device().unwrap());
    let p = c.circuit_params(cp).unwrap();
    let s = simulate_spectrum(&p, &c.frequency_grid().unwrap());
    let slope = slope_in_band(&s, 10.0, 1e3).unwrap();

    let (x, y): (Vec<f64>, Vec<f64>) = c
        .frequency_grid()
        .unwrap()
        .frequencies()
        .iter()
        .filter(|&&f| (10.0 * (1.0 - 1e-9)..=1e3 * (1.0 + 1e-9)).contains(&f))
        .map(|&f| {
            let (re, im) = common::impedance(p.rs, p.rp, p.cp, f);
            (f.log10(), re.hypot(im).log10())
        })
        .unzip();
    assert_eq!(x.len(), 21);
    assert!((slope - common::ls_slope(&x, &y)).abs() < 1e-12);
    assert!((-1.0..=-0.8).contains(&slope), "{slope}");
}

#[test]
fn noiseless_round_trip_over_parameter_grid() {
    for rs in [1e2, 1e3, 1e4] {
        for rp in [1e4, 1e5, 1e6] {
            for cp in [1e-9, 1e-8, 1e-7] {
                let truth = CircuitParams::new(rs, rp, cp).unwrap();
                let fit = fit_circuit(&simulate_spectrum(&truth, &grid()), None).unwrap();
                let err = max_rel_err(&fit.params, &truth);
                assert!(err < 1e-3, "({rs}, {rp}, {cp}): {err}");
            }
        }
    }
}

#[test]
fn two_percent_noise_stays_within_five_percent() {
    let truth = CircuitParams::new(500.0, 5e4, 1e-8).unwrap();
    let clean = simulate_spectrum(&truth, &grid());
    let errs: Vec<f64> = (0..100)
        .map(|seed| max_rel_err(&fit_circuit(&noisy(&clean, 0.02, seed), None).unwrap().params, &truth))
        .collect();
    let p95 = common::percentile(errs, 0.95);
    assert!(p95 <= 0.05, "95th percentile {p95}");
}

#[test]
fn fitted_capacitance_grows_over_sequential_ep() {
    let c = ToolkitConfig::default();
    // Unreachable target: the loop runs until the budget is spent.
    let policy = TuningPolicy::new(1.0, 2.0, 10.0, 0.6, c.sweep().unwrap(), c.policy.vd_v).unwrap();
    let run = tune_device(&c.pristine_device().unwrap(), &policy, &c.growth, &SeedStream::new(5, 0)).unwrap();
    assert_eq!(run.trace.len(), 6);
    let fitted: Vec<f64> = run
        .trace
        .iter()
        .map(|step| {
            let s = simulate_spectrum(&c.circuit_params(step.capacitance_f).unwrap(), &c.frequency_grid().unwrap());
            fit_circuit(&s, None).unwrap().params.cp
        })
        .collect();
    assert!(fitted.windows(2).all(|w| w[1] > w[0]), "{fitted:?}");
}

#[test]
fn csv_round_trip_is_exact_to_nine_digits() {
    let truth = CircuitParams::new(12e3, 1e7, 1.37e-8).unwrap();
    let s = simulate_spectrum(&truth, &grid()).with_metadata("v_dc_v", "0.1");
    let back = parse_spectrum_csv(&write_spectrum_csv(&s)).unwrap();
    assert_eq!(back.metadata.get("v_dc_v").map(String::as_str), Some("0.1"));
    for (a, b) in s.points.iter().zip(&back.points) {
        assert!(((a.re_ohm - b.re_ohm) / a.re_ohm).abs() < 1e-8);
        assert!(((a.im_ohm - b.im_ohm) / a.im_ohm).abs() < 1e-8);
    }
    assert_eq!(write_spectrum_csv(&back), write_spectrum_csv(&s));
}

fn params() -> impl Strategy<Value = CircuitParams> {
    (1.0..5.0f64, 3.0..7.0f64, -10.0..-6.0f64)
        .prop_map(|(a, b, c)| CircuitParams::new(10f64.powf(a), 10f64.powf(b), 10f64.powf(c)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reactance_is_capacitive_and_modulus_decreasing(p in params()) {
        let s = simulate_spectrum(&p, &grid());
        prop_assert!(s.points.iter().all(|pt| pt.im_ohm <= 0.0));
        // Grid runs high to low frequency, so |Z| must not decrease along it.
        let moduli: Vec<f64> = bode(&s).iter().map(|b| b.modulus_ohm).collect();
        prop_assert!(moduli.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn refit_is_idempotent(p in params()) {
        // Keep the semicircle inside the measured band.
        let first = fit_circuit(&simulate_spectrum(&p, &grid()), None).unwrap().params;
        let second = fit_circuit(&simulate_spectrum(&first, &grid()), None).unwrap().params;
        prop_assert!(max_rel_err(&second, &first) < 1e-6);
    }

    #[test]
    fn fit_is_scale_covariant(p in params(), k in 0.01..100.0f64) {
        let s = simulate_spectrum(&p, &grid());
        let base = fit_circuit(&s, None).unwrap().params;
        let scaled = fit_circuit(&s.scaled(k), None).unwrap().params;
        let want = CircuitParams { rs: base.rs * k, rp: base.rp * k, cp: base.cp / k };
        prop_assert!(max_rel_err(&scaled, &want) < 1e-6);
    }

    #[test]
    fn objective_log_decreases(p in params(), seed in 0u64..1000) {
        // Under noise, only a semicircle that stands clear of Rs is identifiable.
        prop_assume!((10.0..1e5).contains(&p.apex_frequency()) && p.rp > 3.0 * p.rs);
        let report = fit_circuit(&noisy(&simulate_spectrum(&p, &grid()), 0.02, seed), None).unwrap();
        prop_assert!(report.objective_log.windows(2).all(|w| w[1] < w[0]));
    }
}
