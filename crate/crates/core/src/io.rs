//! Telemetry and ground-truth CSV, plus the `key = value` text format used by
//! configs, model files and state snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trajectory::TimeSample;

pub const TELEMETRY_HEADER: [&str; 5] = ["cell_id", "t_s", "current_a", "voltage_v", "temperature_c"];
pub const TRUTH_HEADER: [&str; 4] = ["cell_id", "ah", "q_true", "group_label"];

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// later keys override earlier ones.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Writes one cell's stream in the telemetry schema.
pub fn write_telemetry<W: Write>(cell_id: &str, samples: &[TimeSample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TELEMETRY_HEADER)?;
    for s in samples {
        w.write_record([
            cell_id.to_string(),
            s.t.to_string(),
            s.current.to_string(),
            s.voltage.to_string(),
            s.temperature.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn telemetry_file_name(cell_id: &str) -> String {
    format!("cell_{cell_id}.csv")
}

/// Reads telemetry rows from one source, validated and grouped by cell,
/// each stream sorted by time.
pub fn read_telemetry<R: Read>(name: &str, reader: R) -> Result<BTreeMap<String, Vec<TimeSample>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TELEMETRY_HEADER {
        return Err(Error::SchemaError {
            file: name.to_string(),
            row: 1,
            message: format!("header must be `{}`", TELEMETRY_HEADER.join(",")),
        });
    }
    let mut rows: BTreeMap<String, Vec<(usize, TimeSample)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::SchemaError {
            file: name.to_string(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(format!("expected 5 fields, got {}", rec.len())));
        }
        let cell = rec[0].to_string();
        if cell.is_empty() {
            return Err(bad("empty cell_id".into()));
        }
        let mut vals = [0.0; 4];
        for (j, v) in vals.iter_mut().enumerate() {
            let col = TELEMETRY_HEADER[j + 1];
            *v = rec[j + 1]
                .parse::<f64>()
                .map_err(|e| bad(format!("{col}: {e}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{col} is not finite")));
            }
        }
        rows.entry(cell)
            .or_default()
            .push((row, TimeSample::new(vals[0], vals[1], vals[2], vals[3])));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile(name.to_string()));
    }
    let mut out = BTreeMap::new();
    for (cell, mut list) in rows {
        list.sort_by(|a, b| a.1.t.total_cmp(&b.1.t));
        for pair in list.windows(2) {
            if pair[0].1.t == pair[1].1.t {
                let row = pair[0].0.max(pair[1].0);
                return Err(Error::DuplicateTimestamp {
                    file: name.to_string(),
                    row,
                    cell_id: cell,
                    t_s: pair[1].1.t,
                });
            }
        }
        out.insert(cell, list.into_iter().map(|(_, s)| s).collect());
    }
    Ok(out)
}

fn csv_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

/// Loads telemetry from a CSV file or every `*.csv` in a directory, except
/// files whose header marks them as ground truth.
pub fn ingest(path: &Path) -> Result<BTreeMap<String, Vec<TimeSample>>> {
    let files = csv_files(path)?;
    let mut out: BTreeMap<String, Vec<TimeSample>> = BTreeMap::new();
    for file in files {
        let text = fs::read_to_string(&file)?;
        if path.is_dir() && text.starts_with(&TRUTH_HEADER.join(",")) {
            continue;
        }
        let name = file.display().to_string();
        for (cell, samples) in read_telemetry(&name, text.as_bytes())? {
            if out.contains_key(&cell) {
                return Err(Error::SchemaError {
                    file: name,
                    row: 2,
                    message: format!("cell {cell} appears in more than one file"),
                });
            }
            out.insert(cell, samples);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    Ok(out)
}

/// One ground-truth capacity label.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub cell_id: String,
    pub ah: f64,
    pub q_true: f64,
    /// 1-based group label.
    pub group_label: usize,
}

pub fn write_truth<W: Write>(rows: &[TruthRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER)?;
    for r in rows {
        w.write_record([
            r.cell_id.clone(),
            r.ah.to_string(),
            r.q_true.to_string(),
            r.group_label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: Read>(name: &str, reader: R) -> Result<Vec<TruthRow>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRUTH_HEADER {
        return Err(Error::SchemaError {
            file: name.to_string(),
            row: 1,
            message: format!("header must be `{}`", TRUTH_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let bad = |message: String| Error::SchemaError {
            file: name.to_string(),
            row,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            let v = rec[j]
                .parse::<f64>()
                .map_err(|e| bad(format!("{}: {e}", TRUTH_HEADER[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("{} is not finite", TRUTH_HEADER[j])))
            }
        };
        out.push(TruthRow {
            cell_id: rec[0].to_string(),
            ah: num(1)?,
            q_true: num(2)?,
            group_label: rec[3]
                .parse()
                .map_err(|e| bad(format!("group_label: {e}")))?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyFile(name.to_string()));
    }
    Ok(out)
}
