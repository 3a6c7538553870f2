//! Plain-CSV import/export of waveform records.
//!
//! Formats: header `t,a,b,c` (three-phase) or `t,d,q` (rotating frame), one
//! sample per row, decimal ASCII, time in seconds. Values are written with
//! Rust's shortest round-trip float formatting, so write -> read reproduces
//! the numbers bit-exactly.

use super::{DqSeries, ThreePhaseSeries};
use crate::error::{Error, Result};
use crate::scalar::{lower, Scalar};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

const ABC_HEADER: &str = "t,a,b,c";
const DQ_HEADER: &str = "t,d,q";

/// Writes a three-phase record as `t,a,b,c` rows.
pub fn write_three_phase_csv<T: Scalar>(path: &Path, series: &ThreePhaseSeries<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{ABC_HEADER}")?;
    for k in 0..series.len() {
        writeln!(
            w,
            "{},{},{},{}",
            lower(series.time(k)),
            lower(series.a[k]),
            lower(series.b[k]),
            lower(series.c[k])
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dq record as `t,d,q` rows.
pub fn write_dq_csv<T: Scalar>(path: &Path, series: &DqSeries<T>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{DQ_HEADER}")?;
    for k in 0..series.len() {
        writeln!(w, "{},{},{}", lower(series.time(k)), lower(series.d[k]), lower(series.q[k]))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_rows(path: &Path, header: &str, columns: usize) -> Result<Vec<Vec<f64>>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: empty file", path.display())))??;
    if first.trim() != header {
        return Err(Error::Parse(format!(
            "{}: expected header '{header}', found '{}'",
            path.display(),
            first.trim()
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Parse(format!(
                "{}: row {} has {} fields, expected {columns}",
                path.display(),
                idx + 2,
                fields.len()
            )));
        }
        let mut row = Vec::with_capacity(columns);
        for f in fields {
            row.push(f.trim().parse::<f64>().map_err(|e| {
                Error::Parse(format!("{}: row {}: {e}", path.display(), idx + 2))
            })?);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::Parse(format!(
            "{}: need at least 2 samples to establish the time grid",
            path.display()
        )));
    }
    Ok(rows)
}

/// Validates the uniform time grid and returns (t0, dt).
fn time_grid(path: &Path, rows: &[Vec<f64>]) -> Result<(f64, f64)> {
    let t0 = rows[0][0];
    let dt = rows[1][0] - t0;
    if dt <= 0.0 {
        return Err(Error::Parse(format!("{}: non-increasing time column", path.display())));
    }
    let span = (rows.len() - 1) as f64 * dt;
    let tol = 1e-9 * span.max(dt);
    for (k, row) in rows.iter().enumerate() {
        let expected = t0 + k as f64 * dt;
        if (row[0] - expected).abs() > tol {
            return Err(Error::Parse(format!(
                "{}: non-uniform sampling at row {} (t = {}, expected {expected})",
                path.display(),
                k + 2,
                row[0]
            )));
        }
    }
    Ok((t0, dt))
}

/// Reads a `t,a,b,c` file written by [`write_three_phase_csv`] (or any
/// uniformly sampled equivalent).
pub fn read_three_phase_csv(path: &Path) -> Result<ThreePhaseSeries<f64>> {
    let rows = parse_rows(path, ABC_HEADER, 4)?;
    let (t0, dt) = time_grid(path, &rows)?;
    let a = rows.iter().map(|r| r[1]).collect();
    let b = rows.iter().map(|r| r[2]).collect();
    let c = rows.iter().map(|r| r[3]).collect();
    ThreePhaseSeries::new(t0, dt, a, b, c, "")
}

/// Reads a `t,d,q` file; the rotating-frame rate is not stored in the CSV and
/// must be supplied. The result is marked as raw (`is_small_signal = false`).
pub fn read_dq_csv(path: &Path, frame_freq: f64) -> Result<DqSeries<f64>> {
    let rows = parse_rows(path, DQ_HEADER, 3)?;
    let (t0, dt) = time_grid(path, &rows)?;
    let d = rows.iter().map(|r| r[1]).collect();
    let q = rows.iter().map(|r| r[2]).collect();
    DqSeries::new(t0, dt, d, q, frame_freq, "")
}
