//! CSV and JSON writers. All CSV files are UTF-8 with `\n` line endings and a
//! header row; floats use the shortest representation that round-trips.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sqn_core::optimizer::RunRecord;

pub fn fmt_f64(v: f64) -> String {
    ryu::Buffer::new().format(v).to_owned()
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

/// Header of a trace file for a problem with the given coordinate names.
pub fn trace_header(names: &[String]) -> Vec<String> {
    let mut h = vec!["k".to_owned()];
    h.extend(names.iter().cloned());
    h.extend(
        ["fhat", "gnorm", "alpha", "lambda", "ls_trials", "satisfied"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// One row per iteration: `k`, the iterate, `fhat`, `gnorm`, `alpha`,
/// `lambda`, `ls_trials`, `satisfied`.
pub fn write_trace(path: &Path, rec: &RunRecord, names: &[String]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(trace_header(names))?;
    for row in &rec.rows {
        let mut rec = vec![row.k.to_string()];
        rec.extend(row.x.iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(row.f_hat));
        rec.push(fmt_f64(row.g_norm));
        rec.push(fmt_f64(row.alpha));
        rec.push(fmt_f64(row.lambda));
        rec.push(row.ls_trials.to_string());
        rec.push(u8::from(row.satisfied).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A scalar series as `t,y` with `t = 1..N`.
pub fn write_series(path: &Path, y: &[f64]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["t", "y"])?;
    for (i, v) in y.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,y` series; extra `y` columns are ignored.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = rec.get(1).context("series row without a y column")?;
        y.push(v.parse().with_context(|| format!("bad value {v:?}"))?);
    }
    Ok(y)
}

/// A table of float columns with a leading row label.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
