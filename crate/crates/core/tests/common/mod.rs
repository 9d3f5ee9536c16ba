//! Independent reference implementations used as test oracles. Nothing here
//! calls into the library's numerics.

#![allow(dead_code)]

use std::f64::consts::PI;

use oect_core::device::DeviceState;

/// Unit conversions: um -> cm, nm -> cm.
const UM: f64 = 1e-4;
const NM: f64 = 1e-7;

/// `af * W * L * sum(d * C*)` in farad.
pub fn capacitance(state: &DeviceState) -> f64 {
    let g = state.geometry();
    let dc: f64 = state.layers().iter().map(|l| l.thickness_nm * NM * l.vol_capacitance_f_cm3).sum();
    g.area_factor * g.width_um * UM * g.length_um * UM * dc
}

fn k_factor(state: &DeviceState) -> f64 {
    let g = state.geometry();
    let s: f64 = state.layers().iter().map(|l| l.thickness_nm * NM * l.mobility_cm2_vs * l.vol_capacitance_f_cm3).sum();
    g.width_um / g.length_um * s
}

/// Depletion-mode p-type drain current, written out branch by branch.
pub fn drain_current(state: &DeviceState, vg: f64, vd: f64) -> f64 {
    let k = k_factor(state);
    let u = state.vth() - vg;
    if u <= 0.0 {
        0.0
    } else if -vd < u {
        k * (u + vd / 2.0) * vd
    } else {
        -k * u * u / 2.0
    }
}

/// Central finite difference of `dI/dVg`. The current is negative and
/// shrinks in magnitude as Vg rises, so the derivative is non-negative.
pub fn fd_transconductance(state: &DeviceState, vg: f64, vd: f64, h: f64) -> f64 {
    (drain_current(state, vg + h, vd) - drain_current(state, vg - h, vd)) / (2.0 * h)
}

/// Peak of the hand-derived Gm, `K * min(u, -vd)`, on an evenly spaced sweep.
pub fn peak_gm(state: &DeviceState, start: f64, stop: f64, points: usize, vd: f64) -> f64 {
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .map(|vg| {
            let u = state.vth() - vg;
            if u <= 0.0 {
                0.0
            } else {
                k_factor(state) * u.min(-vd)
            }
        })
        .fold(0.0, f64::max)
}

/// `Rs + Rp / (1 + j w Rp Cp)` in real arithmetic: (Re, Im).
pub fn impedance(rs: f64, rp: f64, cp: f64, f: f64) -> (f64, f64) {
    let a = 2.0 * PI * f * rp * cp;
    let d = 1.0 + a * a;
    (rs + rp / d, -rp * a / d)
}

/// RK4 integration of `dv/dt = (u(t) - v) / tau` over a pulse train, with
/// at most `tau / 1000` per step. Returns `v` at each requested time
/// (sorted ascending). Segment boundaries are hit exactly.
pub fn rk4_pulse_train(tau: f64, width: f64, period: f64, n_pulses: usize, times: &[f64]) -> Vec<f64> {
    let h_max = tau / 1000.0;
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut v = 0.0;
    let mut t = 0.0;
    let emit = |t: f64, v: f64, out: &mut Vec<f64>, next: &mut usize| {
        while *next < times.len() && (times[*next] - t).abs() <= 1e-12 * period.max(t) {
            out.push(v);
            *next += 1;
        }
    };
    emit(t, v, &mut out, &mut next);
    for k in 0..n_pulses {
        for (len, u) in [(width, 1.0), (period - width, 0.0)] {
            let start = k as f64 * period + if u == 1.0 { 0.0 } else { width };
            // Land on every requested time inside the segment.
            let mut stops: Vec<f64> =
                times.iter().copied().filter(|&x| x > start + 1e-15 && x <= start + len * (1.0 + 1e-12)).collect();
            stops.push(start + len);
            stops.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            let mut local = start;
            for stop in stops {
                let span = stop - local;
                if span <= 0.0 {
                    continue;
                }
                let n = (span / h_max).ceil() as usize;
                let h = span / n as f64;
                let f = |v: f64| (u - v) / tau;
                for _ in 0..n {
                    let k1 = f(v);
                    let k2 = f(v + h / 2.0 * k1);
                    let k3 = f(v + h / 2.0 * k2);
                    let k4 = f(v + h * k3);
                    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
                local = stop;
                t = stop;
                emit(t, v, &mut out, &mut next);
            }
        }
    }
    out
}

/// Linear-regression slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn percentile(mut xs: Vec<f64>, p: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let rank = (p * (xs.len() - 1) as f64).round() as usize;
    xs[rank]
}

pub fn median(xs: Vec<f64>) -> f64 {
    let mut xs = xs;
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Sample mean and unbiased standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}
