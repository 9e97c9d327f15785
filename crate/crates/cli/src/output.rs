//! Output directories and their `run_manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bayesgeo::digest::{hash_path, sha256_hex};
use bayesgeo::report::write_atomic;
use serde::Serialize;
use serde_json::Value;

pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
struct InputDigest {
    role: String,
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    config_sha256: String,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

/// Collects what one command read and wrote. No timestamps or absolute
/// paths are recorded, so identical runs give identical manifests.
pub struct Run {
    command: String,
    config: Value,
    inputs: Vec<(String, PathBuf)>,
    out: PathBuf,
}

impl Run {
    pub fn new(command: &str, config: impl Serialize, out: &Path) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            out: out.to_path_buf(),
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> &mut Self {
        self.inputs.push((role.to_string(), path.to_path_buf()));
        self
    }

    pub fn dir(&self) -> &Path {
        &self.out
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.out.join(name), bytes)?;
        Ok(())
    }

    /// Write the manifest listing every file now in the output directory.
    pub fn finish(self) -> Result<()> {
        let mut outputs = Vec::new();
        for e in fs::read_dir(&self.out).with_context(|| format!("listing {}", self.out.display()))? {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if name != RUN_MANIFEST && e.file_type()?.is_file() {
                outputs.push(name);
            }
        }
        outputs.sort();
        let mut inputs = Vec::with_capacity(self.inputs.len());
        for (role, path) in &self.inputs {
            inputs.push(InputDigest {
                role: role.clone(),
                name: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: hash_path(path).with_context(|| format!("hashing {}", path.display()))?,
            });
        }
        let config_sha256 = sha256_hex(serde_json::to_string(&self.config)?.as_bytes());
        let m = RunManifest {
            tool: "bayesgeo",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config: &self.config,
            config_sha256,
            inputs,
            outputs,
        };
        self.write_json(RUN_MANIFEST, &m)
    }
}
