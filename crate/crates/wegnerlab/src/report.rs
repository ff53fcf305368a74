//! Machine-readable outputs: tidy CSV result tables, JSON summaries of the
//! inequality checks, and per-instance verification reports.
//!
//! All files are written atomically (temp file in the target directory, then
//! rename), and all content is deterministic for a fixed master seed: rows
//! are canonically sorted and floats go through the shortest round-trip
//! formatter, so reruns produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiments::{FitSummary, ResultRow};

/// One verified inequality with its measured value and margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    /// Stable identifier, e.g. `spectral_averaging_bound`.
    pub id: String,
    /// The inequality or criterion in formula form.
    pub statement: String,
    pub measured: f64,
    pub bound: f64,
    /// Slack left in the check; negative margins fail.
    pub margin: f64,
    pub passed: bool,
}

impl CheckOutcome {
    /// measured ≤ bound.
    pub fn upper(id: &str, statement: &str, measured: f64, bound: f64) -> Self {
        CheckOutcome {
            id: id.into(),
            statement: statement.into(),
            measured,
            bound,
            margin: bound - measured,
            passed: measured <= bound,
        }
    }

    /// lo ≤ measured ≤ hi, reported with bound = hi.
    pub fn in_range(id: &str, statement: &str, measured: f64, lo: f64, hi: f64) -> Self {
        CheckOutcome {
            id: id.into(),
            statement: statement.into(),
            measured,
            bound: hi,
            margin: (measured - lo).min(hi - measured),
            passed: measured >= lo && measured <= hi,
        }
    }

    /// measured ≥ floor.
    pub fn lower(id: &str, statement: &str, measured: f64, floor: f64) -> Self {
        CheckOutcome {
            id: id.into(),
            statement: statement.into(),
            measured,
            bound: floor,
            margin: measured - floor,
            passed: measured >= floor,
        }
    }
}

/// Per-instance record of one randomized bound check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceReport {
    pub instance_seed: u64,
    /// The verified estimate (certified upper estimate when available,
    /// otherwise the rigorous lower estimate).
    pub lhs: f64,
    pub bound: f64,
    pub margin: f64,
    /// Whether the estimate carries a two-sided certificate.
    pub certified: bool,
}

/// Everything a run reports: checks, fits, and reproducibility metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub master_seed: u64,
    pub checks: Vec<CheckOutcome>,
    pub fits: Vec<FitSummary>,
    pub all_passed: bool,
}

impl RunSummary {
    pub fn new(master_seed: u64) -> Self {
        RunSummary {
            master_seed,
            checks: Vec::new(),
            fits: Vec::new(),
            all_passed: true,
        }
    }

    pub fn push_check(&mut self, check: CheckOutcome) {
        self.all_passed &= check.passed;
        self.checks.push(check);
    }

    pub fn extend_checks(&mut self, checks: impl IntoIterator<Item = CheckOutcome>) {
        for c in checks {
            self.push_check(c);
        }
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp: PathBuf = dir.to_path_buf();
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    tmp.push(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// `results.csv` with columns exactly `realization,L,epsilon,statistic,value`.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["realization", "L", "epsilon", "statistic", "value"])
            .map_err(csv_err)?;
        for r in rows {
            w.write_record([
                r.realization.to_string(),
                r.l.to_string(),
                format_float(r.epsilon),
                r.statistic.clone(),
                format_float(r.value),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

/// Decay-scan CSV with columns `separation,trace_norm,fit_residual`.
pub fn write_decay_csv(path: &Path, rows: &[(f64, f64, f64)]) -> std::io::Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["separation", "trace_norm", "fit_residual"])
            .map_err(csv_err)?;
        for &(s, n, res) in rows {
            w.write_record([format_float(s), format_float(n), format_float(res)])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

/// Eigenvalue list as CSV with columns `index,eigenvalue`.
pub fn write_eigenvalues_csv(
    path: &Path,
    sd: &crate::spectra::SpectralData,
) -> std::io::Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["index", "eigenvalue"]).map_err(csv_err)?;
        for (i, &l) in sd.eigenvalues.iter().enumerate() {
            w.write_record([i.to_string(), format_float(l)])
                .map_err(csv_err)?;
        }
        w.flush()?;
    }
    atomic_write(path, &buf)
}

/// Pretty-printed JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

fn format_float(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json's float formatting (ryu) is shortest-round-trip and stable;
    // reuse it for CSV cells.
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}
