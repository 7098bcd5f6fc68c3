//! File formats used by the command-line front end.
//!
//! Problems and query points are CSV with one point per row; a header row is
//! optional and detected by whether its first cell parses as a number.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PointSet;
use crate::wells::EvalResult;

/// Reads numeric rows, skipping a leading header.
pub fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::InvalidInput(format!("{}: row {}: {e}", path.display(), i + 1)));
            }
        }
    }
    if let Some(first) = rows.first() {
        let width = first.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::InvalidInput(format!("{}: row {} has a different width", path.display(), bad + 1)));
        }
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{}: non-finite entry", path.display())));
    }
    Ok(rows)
}

/// Columns `x1..xd, y`.
pub fn read_problem(path: &Path) -> Result<(PointSet, Vec<f64>)> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no data rows", path.display())));
    }
    if rows[0].len() < 2 {
        return Err(Error::InvalidInput(format!("{}: need at least one coordinate and y", path.display())));
    }
    let d = rows[0].len() - 1;
    let y = rows.iter().map(|r| r[d]).collect();
    let points = rows.into_iter().map(|mut r| {
        r.truncate(d);
        r
    });
    Ok((PointSet::new(points.collect())?, y))
}

/// Columns `x1..xd`.
pub fn read_points(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let rows = read_rows(path)?;
    if let Some(r) = rows.first() {
        if r.len() != d {
            return Err(Error::InvalidInput(format!("{}: expected {d} columns, found {}", path.display(), r.len())));
        }
    }
    Ok(rows)
}

/// Columns `x1..xd, value, g1..gd`.
pub fn write_evaluations(w: impl Write, queries: &[Vec<f64>], results: &[EvalResult]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    let d = queries.first().map_or(0, Vec::len);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("value".into());
    header.extend((1..=d).map(|i| format!("g{i}")));
    writer.write_record(&header)?;
    for (x, r) in queries.iter().zip(results) {
        let row = x.iter().chain(std::iter::once(&r.value)).chain(&r.gradient).map(f64::to_string);
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

pub fn write_json<T: Serialize>(w: impl Write, value: &T) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
