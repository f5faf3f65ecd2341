use std::path::Path;

use crate::error::{Error, Result};

/// One `manifest.csv` row. Optional fields are written as empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub file: String,
    pub area: Option<f64>,
    pub perimeter: Option<f64>,
    pub class: Option<usize>,
    pub scale: Option<f64>,
    pub noise_sigma: f64,
}

const HEADER: [&str; 6] = ["file", "area", "perimeter", "class", "scale", "noise_sigma"];

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn parse<T: std::str::FromStr>(s: &str, line: u64, col: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Parse { offset: line, message: format!("bad {col} value {s:?} on line {line}") })
}

pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record([
            r.file.clone(),
            cell(&r.area),
            cell(&r.perimeter),
            cell(&r.class),
            cell(&r.scale),
            r.noise_sigma.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a manifest. Parse errors report the 1-based line number as offset.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(HEADER) {
        return Err(Error::Parse { offset: 1, message: format!("manifest header must be {}", HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push(ManifestRow {
            file: rec[0].to_string(),
            area: parse(&rec[1], line, "area")?,
            perimeter: parse(&rec[2], line, "perimeter")?,
            class: parse(&rec[3], line, "class")?,
            scale: parse(&rec[4], line, "scale")?,
            noise_sigma: parse(&rec[5], line, "noise_sigma")?.unwrap_or(0.0),
        });
    }
    Ok(rows)
}
