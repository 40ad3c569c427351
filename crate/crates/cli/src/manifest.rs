use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use archgraph::search::SearchConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. Only `timestamp` varies between
/// identical invocations.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: SearchConfig,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: &SearchConfig, seeds: Vec<u64>) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config: config.clone(),
            seeds,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }
}

/// Primary output plus sidecars. Without an output path the primary goes
/// to stdout, sidecars are dropped and the manifest goes to stderr.
pub struct Outputs {
    primary: Option<PathBuf>,
    files: Vec<(PathBuf, Vec<u8>)>,
    stdout: Vec<u8>,
}

impl Outputs {
    pub fn new(primary: Option<PathBuf>) -> Self {
        Self { primary, files: Vec::new(), stdout: Vec::new() }
    }

    pub fn primary(&mut self, bytes: impl Into<Vec<u8>>) {
        match &self.primary {
            Some(p) => self.files.push((p.clone(), bytes.into())),
            None => self.stdout.extend(bytes.into()),
        }
    }

    /// `<dir>/<stem>.<suffix>` next to the primary output.
    pub fn sidecar(&mut self, suffix: &str, bytes: impl Into<Vec<u8>>) {
        if let Some(p) = sidecar_path(self.primary.as_deref(), suffix) {
            self.files.push((p, bytes.into()));
        }
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<()> {
        for (path, bytes) in &self.files {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            manifest.outputs.push(FileDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
        }
        match sidecar_path(self.primary.as_deref(), "manifest.json") {
            Some(path) => {
                let text = serde_json::to_string_pretty(&manifest)? + "\n";
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            None => {
                use std::io::Write;
                manifest.outputs.push(FileDigest { path: "-".into(), sha256: sha256_hex(&self.stdout) });
                std::io::stdout().write_all(&self.stdout)?;
                eprintln!("{}", serde_json::to_string(&manifest)?);
            }
        }
        Ok(())
    }
}

fn sidecar_path(primary: Option<&Path>, suffix: &str) -> Option<PathBuf> {
    let p = primary?;
    let stem = p.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    Some(p.with_file_name(format!("{stem}.{suffix}")))
}
