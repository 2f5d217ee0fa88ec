//! CSV tables and the run manifest.

use std::path::{Path, PathBuf};

use precond_risk::format_float;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// One output file: a fixed header and string rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &'static str, columns: &'static [&'static str]) -> Self {
        Table { file, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.file);
        self.rows.push(row);
    }

    /// RFC 4180 bytes: CRLF line ends, quoting only where needed.
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn f(x: f64) -> String {
    format_float(x)
}

pub fn opt_f(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub pipeline: String,
    pub config_sha256: String,
    pub generator: String,
    pub software_version: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<FileRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `dir/name` and returns its manifest entry.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8], columns: &[&str]) -> CliResult<FileRecord> {
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(FileRecord {
        path: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len(),
        columns: columns.iter().map(|c| c.to_string()).collect(),
    })
}
