//! CSV tables, run summaries and the run-directory layout.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::trainer::{Profiles, TraceRecord};

pub const CONFIG_FILE: &str = "config.toml";
pub const TRACE_FILE: &str = "trace.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const PROFILES_FILE: &str = "profiles.csv";

pub const TRACE_COLUMNS: [&str; 8] = ["epoch", "s_est", "loss_ge1", "loss_ge2", "loss_limit", "loss_bc", "loss_trans", "loss_total"];
pub const PROFILE_COLUMNS: [&str; 5] = ["z", "u", "u_z", "v", "v_z"];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::Other, format!("{other:?}")),
    }
}

/// Writes a header row and string rows.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()
}

pub fn trace_rows(trace: &[TraceRecord]) -> Vec<Vec<String>> {
    trace
        .iter()
        .map(|r| {
            let l = &r.losses;
            vec![r.epoch.to_string(), num(r.s_est), num(l.ge1), num(l.ge2), num(l.limit), num(l.bc), num(l.trans), num(l.total)]
        })
        .collect()
}

pub fn profile_rows(p: &Profiles) -> Vec<Vec<String>> {
    (0..p.z.len()).map(|i| vec![num(p.z[i]), num(p.u[i]), num(p.u_z[i]), num(p.v[i]), num(p.v_z[i])]).collect()
}

/// Numeric table read back from a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    /// Column-major; unparsable cells become NaN.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }
}

pub fn read_csv(path: &Path) -> io::Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for (i, col) in columns.iter_mut().enumerate() {
            col.push(rec.get(i).and_then(|c| c.trim().parse().ok()).unwrap_or(f64::NAN));
        }
    }
    Ok(Table { header, columns })
}

/// Contents of `summary.toml`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub label: String,
    pub system: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub epochs: usize,
    pub s_est: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
    pub loss_ge1: f64,
    pub loss_ge2: f64,
    pub loss_limit: f64,
    pub loss_bc: f64,
    pub loss_trans: f64,
    pub loss_total: f64,
    /// Over 201 points on `[−10, 10]`.
    pub monotonicity_violations: usize,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let text = toml::to_string(self).map_err(|e| io::Error::new(io::ErrorKind::Other, e.to_string()))?;
        fs::write(path, text)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

/// Paths of one run's artifacts.
#[derive(Clone, Debug, PartialEq)]
pub struct RunDir(pub PathBuf);

impl RunDir {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self(dir.to_path_buf()))
    }

    pub fn config(&self) -> PathBuf {
        self.0.join(CONFIG_FILE)
    }
    pub fn trace(&self) -> PathBuf {
        self.0.join(TRACE_FILE)
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.0.join(CHECKPOINT_FILE)
    }
    pub fn summary(&self) -> PathBuf {
        self.0.join(SUMMARY_FILE)
    }
    pub fn profiles(&self) -> PathBuf {
        self.0.join(PROFILES_FILE)
    }
}
