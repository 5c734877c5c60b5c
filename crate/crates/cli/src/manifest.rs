use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Verdicts {
    /// Every piece certifies its tag and the envelopes pass the sampled convexity test.
    pub quasiconvexity: Option<bool>,
    /// `Ȟ1 ≥ Ȟ2 ≥ …` and `Ĥ1 ≤ Ĥ2 ≤ …` on the samples (or enforced by reordering).
    pub ordering: Option<bool>,
    /// Every check/hat pair and every shifted pair is stable.
    pub a4: Option<bool>,
    pub m: Option<bool>,
    pub m_strict: Option<bool>,
    pub e: Option<bool>,
    pub witnesses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub verdicts: Verdicts,
    /// Stage name to wall-clock seconds.
    pub timings: BTreeMap<String, f64>,
    pub results: BTreeMap<String, serde_json::Value>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            verdicts: Verdicts::default(),
            timings: BTreeMap::new(),
            results: BTreeMap::new(),
            files: Vec::new(),
        }
    }

    pub fn record(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result values serialize");
        self.results.insert(key.to_string(), v);
    }

    /// Runs `f` and records its duration under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.timings.insert(stage.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

pub fn sha256_file(path: &Path) -> CliResult<(u64, String)> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok((bytes.len() as u64, hex::encode(Sha256::digest(&bytes))))
}

/// An output directory owned by this process for the duration of a run.
pub struct RunDir {
    root: PathBuf,
    lock: PathBuf,
    written: Vec<PathBuf>,
}

const LOCK_NAME: &str = ".lock";

impl RunDir {
    pub fn open(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        let lock = root.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id()).map_err(CliError::io(&lock))?;
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(CliError::Locked(root.to_path_buf())),
            Err(e) => return Err(CliError::Io { path: lock, source: e }),
        }
        Ok(Self { root: root.to_path_buf(), lock, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `name` through `f` and keeps it for the inventory.
    pub fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
        let path = self.root.join(name);
        let file = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(CliError::io(&path))?;
        w.flush().map_err(CliError::io(&path))?;
        if !self.written.contains(&path) {
            self.written.push(path);
        }
        Ok(())
    }

    pub fn inventory(&self) -> CliResult<Vec<FileEntry>> {
        let mut out = Vec::with_capacity(self.written.len());
        for p in &self.written {
            let (bytes, sha256) = sha256_file(p)?;
            let name = p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().into_owned();
            out.push(FileEntry { path: name, bytes, sha256 });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(out)
    }

    /// Adds the inventory to `manifest` and writes it as `manifest-<command>.json`.
    pub fn finish(&mut self, manifest: &mut RunManifest) -> CliResult<PathBuf> {
        manifest.files = self.inventory()?;
        let name = format!("manifest-{}.json", manifest.command);
        let path = self.root.join(&name);
        let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
        Ok(path)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
