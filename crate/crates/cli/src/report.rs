//! Report envelopes and atomic artifact writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Wraps a result with the schema version, the full config and content
/// hashes of both.
pub fn envelope(subcommand: &str, config: &ExperimentConfig, result: Value) -> Value {
    let config = config.to_json();
    let config_bytes = serde_json::to_vec(&config).expect("json values serialize");
    let result_bytes = serde_json::to_vec(&result).expect("json values serialize");
    json!({
        "schema": SCHEMA_VERSION,
        "subcommand": subcommand,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "config_sha256": sha256_hex(&config_bytes),
        "result": result,
        "result_sha256": sha256_hex(&result_bytes),
    })
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Output directory owned by one subcommand. Every file is written to a
/// temporary sibling first and renamed into place.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(out: &Path, subcommand: &str) -> Result<Self, CliError> {
        let dir = out.join(subcommand);
        std::fs::create_dir_all(&dir)?;
        Ok(Artifacts {
            dir,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        let path = self.dir.join(name);
        tmp.persist(&path).map_err(|e| CliError::Io(e.error))?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("json values serialize");
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes an RFC 4180 table with a mandatory header row.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    /// Writes a table produced by a closure over a raw CSV writer.
    pub fn write_with<F>(&mut self, name: &str, fill: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut bytes = Vec::new();
        fill(&mut bytes)?;
        self.write_bytes(name, &bytes)
    }
}

/// Shortest round-trip text for a float, used in CSV cells.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
