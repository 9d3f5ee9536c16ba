//! Spectrum CSV: `freq_hz,z_real_ohm,z_imag_ohm` rows, `# key=value` metadata.

use std::fmt::Write as _;

use super::{ImpedancePoint, ImpedanceSpectrum};
use crate::error::{Error, Result};
use crate::output::fmt_num;

pub const SPECTRUM_HEADER: &str = "freq_hz,z_real_ohm,z_imag_ohm";

pub fn write_spectrum_csv(spectrum: &ImpedanceSpectrum) -> String {
    let mut out = String::new();
    for (k, v) in &spectrum.metadata {
        writeln!(out, "# {k}={v}").unwrap();
    }
    writeln!(out, "{SPECTRUM_HEADER}").unwrap();
    for p in &spectrum.points {
        writeln!(out, "{},{},{}", fmt_num(p.freq_hz), fmt_num(p.re_ohm), fmt_num(p.im_ohm)).unwrap();
    }
    out
}

pub fn parse_spectrum_csv(text: &str) -> Result<ImpedanceSpectrum> {
    let mut spectrum = ImpedanceSpectrum::default();
    let mut seen_header = false;
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                spectrum.metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        if !seen_header {
            if line != SPECTRUM_HEADER {
                return Err(parse_err(format!("expected header `{SPECTRUM_HEADER}`, got `{line}`")));
            }
            seen_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, got {}", fields.len())));
        }
        let mut values = [0.0; 3];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("invalid number `{field}`")))?;
        }
        let point = ImpedancePoint { freq_hz: values[0], re_ohm: values[1], im_ohm: values[2] };
        if point.freq_hz <= 0.0 {
            return Err(parse_err(format!("frequency must be > 0, got {}", point.freq_hz)));
        }
        if let [.., a, b] = spectrum.points.as_slice() {
            let rising = b.freq_hz > a.freq_hz;
            let ok = if rising { point.freq_hz > b.freq_hz } else { point.freq_hz < b.freq_hz };
            if !ok {
                return Err(parse_err("frequencies must be strictly monotone".into()));
            }
        } else if let [a] = spectrum.points.as_slice() {
            if point.freq_hz == a.freq_hz {
                return Err(parse_err("duplicate frequency".into()));
            }
        }
        spectrum.points.push(point);
    }
    if !seen_header {
        return Err(Error::Parse { line: last_line.max(1), message: "missing header".into() });
    }
    if spectrum.points.is_empty() {
        return Err(Error::Parse { line: last_line.max(1), message: "no data rows".into() });
    }
    Ok(spectrum)
}
