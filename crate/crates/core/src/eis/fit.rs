//! Complex nonlinear least squares for `Rs + (Rp || Cp)`.
//!
//! Minimizes `S = sum_i |Z_model(f_i) - Z_i|^2 / |Z_i|^2` with a
//! Levenberg-Marquardt iteration over `(ln Rs, ln Rp, ln Cp)`. Working in
//! log-parameters keeps every component positive without constraints.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{CircuitParams, ImpedanceSpectrum};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once the largest log-parameter step falls below this.
    pub step_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, step_tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: CircuitParams,
    /// RMS relative misfit, `sqrt(S / N)`.
    pub residual: f64,
    pub iterations: usize,
    /// Objective `S` at the start and after every accepted step.
    pub objective_log: Vec<f64>,
}

struct Problem {
    omega: Vec<f64>,
    data: Vec<Complex64>,
    weight: Vec<f64>,
}

impl Problem {
    fn new(spectrum: &ImpedanceSpectrum) -> Self {
        let omega = spectrum.points.iter().map(|p| 2.0 * PI * p.freq_hz).collect();
        let data: Vec<Complex64> = spectrum.points.iter().map(|p| p.z()).collect();
        let weight = data.iter().map(|z| 1.0 / z.norm()).collect();
        Self { omega, data, weight }
    }

    fn objective(&self, logp: &Vector3<f64>) -> f64 {
        let (rs, rp, cp) = (logp[0].exp(), logp[1].exp(), logp[2].exp());
        self.omega
            .iter()
            .zip(&self.data)
            .zip(&self.weight)
            .map(|((&w, z), &wt)| {
                let model = rs + rp / Complex64::new(1.0, w * rp * cp);
                ((model - z) * wt).norm_sqr()
            })
            .sum()
    }

    /// Normal equations `(J^T J, J^T r)` for the real-stacked residuals.
    fn normal_equations(&self, logp: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let (rs, rp, cp) = (logp[0].exp(), logp[1].exp(), logp[2].exp());
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((&w, z), &wt) in self.omega.iter().zip(&self.data).zip(&self.weight) {
            let denom = Complex64::new(1.0, w * rp * cp);
            let denom2 = denom * denom;
            let r = (rs + rp / denom - z) * wt;
            // dZ / d ln(param)
            let d = [Complex64::new(rs, 0.0), rp / denom2, Complex64::new(0.0, -w * rp * rp * cp) / denom2];
            for a in 0..3 {
                let ja = d[a] * wt;
                jtr[a] += ja.re * r.re + ja.im * r.im;
                for b in 0..3 {
                    let jb = d[b] * wt;
                    jtj[(a, b)] += ja.re * jb.re + ja.im * jb.im;
                }
            }
        }
        (jtj, jtr)
    }
}

fn check_spectrum(spectrum: &ImpedanceSpectrum) -> Result<()> {
    let n = spectrum.points.len();
    if n < 6 {
        return Err(Error::InsufficientData(format!("fit needs >= 6 points, got {n}")));
    }
    let (fmin, fmax) =
        spectrum.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.freq_hz), hi.max(p.freq_hz)));
    if (fmax / fmin).log10() < 2.0 - 1e-9 {
        return Err(Error::InsufficientData(format!("fit needs >= 2 decades, spectrum spans {fmin} to {fmax} Hz")));
    }
    if spectrum.points.iter().any(|p| p.z().norm() == 0.0) {
        return Err(Error::InsufficientData("zero impedance entry".into()));
    }
    let reactive = spectrum.points.iter().map(|p| (p.im_ohm / p.z().norm()).abs()).fold(0.0, f64::max);
    if reactive <= 1e-12 {
        return Err(Error::UnidentifiableSpectrum);
    }
    Ok(())
}

/// Starting point: `Rs` from the highest-frequency modulus, `Rs + Rp` from
/// the lowest, `Cp` from the frequency of the most negative reactance.
pub fn initial_guess(spectrum: &ImpedanceSpectrum) -> Result<CircuitParams> {
    check_spectrum(spectrum)?;
    let by_freq = |a: &&super::ImpedancePoint, b: &&super::ImpedancePoint| a.freq_hz.total_cmp(&b.freq_hz);
    let hi = spectrum.points.iter().max_by(by_freq).expect("non-empty");
    let lo = spectrum.points.iter().min_by(by_freq).expect("non-empty");
    let apex = spectrum.points.iter().min_by(|a, b| a.im_ohm.total_cmp(&b.im_ohm)).expect("non-empty");
    let rs = hi.z().norm();
    let total = lo.z().norm();
    let rp = if total > rs { total - rs } else { total };
    let cp = 1.0 / (2.0 * PI * apex.freq_hz * rp);
    CircuitParams::new(rs, rp, cp)
}

pub fn fit_circuit(spectrum: &ImpedanceSpectrum, guess: Option<CircuitParams>) -> Result<FitReport> {
    fit_circuit_with(spectrum, guess, FitOptions::default())
}

pub fn fit_circuit_with(
    spectrum: &ImpedanceSpectrum,
    guess: Option<CircuitParams>,
    options: FitOptions,
) -> Result<FitReport> {
    check_spectrum(spectrum)?;
    let start = match guess {
        Some(g) => g,
        None => initial_guess(spectrum)?,
    };
    let problem = Problem::new(spectrum);
    let n = spectrum.points.len() as f64;
    let to_params = |p: &Vector3<f64>| CircuitParams { rs: p[0].exp(), rp: p[1].exp(), cp: p[2].exp() };

    let mut logp = Vector3::new(start.rs.ln(), start.rp.ln(), start.cp.ln());
    let mut objective = problem.objective(&logp);
    let mut log = vec![objective];
    let mut lambda = 1e-3;

    for iteration in 1..=options.max_iterations {
        let (jtj, jtr) = problem.normal_equations(&logp);
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-jtr)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            if step.amax() < options.step_tolerance {
                return Ok(FitReport {
                    params: to_params(&logp),
                    residual: (objective / n).sqrt(),
                    iterations: iteration,
                    objective_log: log,
                });
            }
            let trial = logp + step;
            let trial_objective = problem.objective(&trial);
            if trial_objective < objective {
                logp = trial;
                objective = trial_objective;
                log.push(objective);
                lambda = (lambda / 10.0).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }
    }
    Err(Error::FitDidNotConverge {
        best: to_params(&logp),
        residual: (objective / n).sqrt(),
        iterations: options.max_iterations,
    })
}
