//! CSV artifacts. Every file starts with a `# config_hash: <hex>` line and
//! uses Rust's shortest round-trip float formatting, so identical runs give
//! byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{CliError, Result};

pub const HASH_PREFIX: &str = "# config_hash: ";

pub fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<S: AsRef<str>>(path: &Path, hash: &str, header: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{HASH_PREFIX}{hash}").map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], returning the hash and the records
/// after the header.
pub fn read_csv(path: &Path) -> Result<(String, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let hash = first
        .strip_prefix(HASH_PREFIX)
        .ok_or_else(|| CliError::Usage(format!("{}: missing config hash line", path.display())))?
        .to_string();
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<Vec<Vec<String>>, _>>()?;
    Ok((hash, rows))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Hex SHA-256 of `text`.
pub fn hash_text(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}
