//! Run directories: atomically written files indexed by a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use g2flow::algebra::StructureTables;
use g2flow::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub message: Option<String>,
    pub code_version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub table_checksums: BTreeMap<&'static str, String>,
    pub start: Option<serde_json::Value>,
    pub end: Option<serde_json::Value>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn table_checksums(tables: &StructureTables) -> Result<BTreeMap<&'static str, String>> {
    let mut out = BTreeMap::new();
    out.insert("phi", sha256_hex(&serde_json::to_vec(&tables.phi_terms)?));
    out.insert("star_phi", sha256_hex(&serde_json::to_vec(&tables.star_phi_terms)?));
    out.insert("cross", sha256_hex(&serde_json::to_vec(&tables.cross_table)?));
    out.insert("gamma", sha256_hex(&serde_json::to_vec(&tables.gamma)?));
    out.insert("all", sha256_hex(&serde_json::to_vec(tables)?));
    Ok(out)
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut name = path.file_name().context("output path has no file name")?.to_owned();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}

pub struct RunDir {
    dir: PathBuf,
    command: &'static str,
    config: RunConfig,
    files: Vec<FileEntry>,
    pub start: Option<serde_json::Value>,
    pub end: Option<serde_json::Value>,
}

impl RunDir {
    /// Creates the directory and writes the effective configuration.
    pub fn create(dir: &Path, command: &'static str, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut run = Self {
            dir: dir.to_path_buf(),
            command,
            config: config.clone(),
            files: Vec::new(),
            start: None,
            end: None,
        };
        run.write("config.toml", config.to_toml().as_bytes())?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.path(name), bytes)?;
        self.index(name, bytes);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w.into_inner().context("flushing csv")?;
        self.write(name, &bytes)
    }

    /// Indexes a file written by other code.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path
            .strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.index(&name, &bytes);
        Ok(())
    }

    fn index(&mut self, name: &str, bytes: &[u8]) {
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }

    pub fn finish(mut self, status: &str, message: Option<String>) -> Result<PathBuf> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command: self.command.to_string(),
            status: status.to_string(),
            message,
            code_version: g2flow::VERSION.to_string(),
            seed: self.config.seed,
            config: serde_json::to_value(&self.config)?,
            table_checksums: table_checksums(StructureTables::standard())?,
            start: self.start.take(),
            end: self.end.take(),
            files: std::mem::take(&mut self.files),
        };
        let path = self.path(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
