//! Output formatting and run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Scientific notation with 9 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Rounds to 9 significant digits (for JSON reports).
pub fn round_sig9(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().expect("formatted float parses")
    } else {
        x
    }
}

/// Rounds every float in a JSON tree to 9 significant digits.
pub fn rounded_json(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => {
            n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig9(x))).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(rounded_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, rounded_json(v))).collect()),
        other => other,
    }
}

/// A numeric CSV as written by the toolkit: `#` metadata lines, a header,
/// then rows of numbers (non-numeric cells such as status labels are kept
/// as text).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            match &header {
                None => header = Some(cells),
                Some(h) if h.len() != cells.len() => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected {} fields, got {}", h.len(), cells.len()),
                    })
                }
                Some(_) => rows.push(cells),
            }
        }
        let header = header.ok_or(Error::Parse { line: 0, message: "missing header".into() })?;
        Ok(Self { header, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// All values of a numeric column; errors name the offending line.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx =
            self.column_index(name).ok_or_else(|| Error::Parse { line: 1, message: format!("no column {name:?}") })?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = &row[idx];
                cell.parse::<f64>()
                    .map_err(|_| Error::Parse { line: r + 2, message: format!("{name}: {cell:?} is not a number") })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub toolkit_version: String,
    pub outputs: Vec<String>,
}

/// Collects files written by one command so the manifest lists exactly them.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let value = rounded_json(serde_json::to_value(value).expect("report serializes"));
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, command: &str, config_hash: String, seed: u64) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: command.to_string(),
            config_hash,
            seed,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.written.clone(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(manifest)
    }
}
