//! CSV tables, summary and manifest files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Floats are written with 17 significant digits so they round-trip exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Table { file: file.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(file: &str, header: Vec<String>) -> Self {
        Table { file: file.to_string(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        Ok(w.into_inner()?)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// How a replica's random stream was derived from the master seed.
#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub replica: String,
    pub seed: u64,
    pub stream: u64,
}

/// Everything a subcommand produces.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub report: Value,
    pub verdicts: Vec<Verdict>,
    pub seeds: Vec<SeedRecord>,
    /// Effective parameters after defaults.
    pub resolved: Value,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub threads: usize,
    pub passed: bool,
    pub config_file: Option<PathBuf>,
    pub from_config_file: Value,
    pub from_flags: Value,
    pub resolved: Value,
    pub seeds: Vec<SeedRecord>,
    pub outputs: Vec<FileRecord>,
}

fn write(dir: &Path, file: &str, bytes: &[u8]) -> Result<FileRecord> {
    fs::write(dir.join(file), bytes).with_context(|| format!("writing {}", dir.join(file).display()))?;
    Ok(FileRecord { file: file.to_string(), bytes: bytes.len(), sha256: format!("{:x}", Sha256::digest(bytes)) })
}

/// Writes the tables and `summary.json`, returning their inventory.
pub fn write_outputs(dir: &Path, command: &str, out: &RunOutput) -> Result<Vec<FileRecord>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut records = Vec::new();
    for t in &out.tables {
        records.push(write(dir, &t.file, &t.bytes()?)?);
    }
    let summary = serde_json::json!({
        "command": command,
        "passed": out.passed(),
        "verdicts": out.verdicts,
        "report": out.report,
    });
    records.push(write(dir, "summary.json", &serde_json::to_vec_pretty(&summary)?)?);
    Ok(records)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write(dir, "manifest.json", &serde_json::to_vec_pretty(manifest)?)?;
    Ok(())
}
