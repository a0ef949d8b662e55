//! CSV tables and the run manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Shortest round-trip decimal; exponent form only at extreme magnitudes.
pub fn fmt_real(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_reals(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_real(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Header plus rows, comma separated, `\n` line endings, quoting only where
/// a field needs it.
pub fn write_csv(table: &Table, path: &Path) -> io::Result<()> {
    let width = table.header.len();
    if let Some((i, r)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("row {i} has {} fields, header has {width}", r.len()),
        ));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()
}

pub fn read_csv(path: &Path) -> io::Result<Table> {
    let mut r = csv::ReaderBuilder::new().from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub label: String,
    pub command: String,
    pub artifact_version: String,
    pub config: Vec<String>,
    pub seed: u64,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<OutputFile>,
    /// Command-specific scalar results.
    pub summary: Value,
    pub path: PathBuf,
}

impl RunManifest {
    pub fn to_json(&self) -> Value {
        json!({
            "label": self.label,
            "command": self.command,
            "artifact_version": self.artifact_version,
            "config": self.config,
            "seed": self.seed,
            "started_unix": self.started_unix,
            "finished_unix": self.finished_unix,
            "files": self.files.iter().map(|f| json!({
                "name": f.name,
                "bytes": f.bytes,
                "sha256": f.sha256,
            })).collect::<Vec<_>>(),
            "summary": self.summary,
        })
    }

    /// Recomputes every digest and returns the names that no longer match.
    pub fn stale_files(&self, dir: &Path) -> io::Result<Vec<String>> {
        let mut out = Vec::new();
        for f in &self.files {
            if sha256_file(&dir.join(&f.name))? != f.sha256 {
                out.push(f.name.clone());
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_round_trip() {
        assert_eq!(fmt_real(0.1), "0.1");
        assert_eq!(fmt_real(1.0), "1.0");
        assert_eq!(fmt_real(-2.5e-12), "-2.5e-12");
        let v = 1.0 / 3.0;
        assert_eq!(fmt_real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn one_row_table_has_two_lines_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        let vals = [0.1, std::f64::consts::PI * 1e-300];
        t.push_reals(&vals);
        write_csv(&t, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        assert!(text.starts_with("a,b\n0.1,"));
        let back = read_csv(&path).unwrap();
        for (s, v) in back.rows[0].iter().zip(vals) {
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn ragged_table_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into()]);
        assert!(write_csv(&t, &dir.path().join("r.csv")).is_err());
    }
}
