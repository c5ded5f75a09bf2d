//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::arrays::{write_png16, write_png8, Array, ARRAY_VERSION};
use crate::error::{Error, Result};
use crate::score_training::CHECKPOINT_VERSION;

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes files into one directory and remembers their hashes.
pub struct Artifacts {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
    unhashed: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts { dir: dir.to_path_buf(), hashes: BTreeMap::new(), unhashed: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let bytes = fs::read(self.path(name))?;
        self.hashes.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.path(name), bytes)?;
        self.record(name)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.bytes(name, text.as_bytes())
    }

    /// Run-dependent output (wall-clock timings) left out of the hash list.
    pub fn volatile_text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        self.unhashed.push(name.to_string());
        Ok(())
    }

    pub fn array(&mut self, name: &str, array: &Array) -> Result<()> {
        array.save(&self.path(name))?;
        self.record(name)
    }

    pub fn png16(&mut self, name: &str, values: &[f64], height: usize, width: usize) -> Result<()> {
        write_png16(&self.path(name), values, height, width)?;
        self.record(name)
    }

    pub fn png8(&mut self, name: &str, values: &[u8], height: usize, width: usize) -> Result<()> {
        write_png8(&self.path(name), values, height, width)?;
        self.record(name)
    }

    pub fn hashes(&self) -> &BTreeMap<String, String> {
        &self.hashes
    }

    /// Writes the manifest that embeds `config_text` so the run can be repeated.
    pub fn finish(self, command: &str, config_text: &str, config_dir: &Path, seed: u64) -> Result<Manifest> {
        let manifest = Manifest {
            manifest: ManifestHeader {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                array_format: ARRAY_VERSION as u32,
                checkpoint_format: CHECKPOINT_VERSION,
                seed,
                config_sha256: sha256_hex(config_text.as_bytes()),
                config_dir: config_dir.to_path_buf(),
                config: config_text.to_string(),
                unhashed: self.unhashed,
            },
            artifacts: self.hashes,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    /// `run` or `train`.
    pub command: String,
    pub version: String,
    pub array_format: u32,
    pub checkpoint_format: u32,
    pub seed: u64,
    pub config_sha256: String,
    /// Directory relative config paths were resolved against.
    pub config_dir: PathBuf,
    pub config: String,
    pub unhashed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest: ManifestHeader,
    /// File name → sha256 hex.
    pub artifacts: BTreeMap<String, String>,
}

/// Config text and base directory, from either a config file or a manifest.
pub fn load_config_source(path: &Path, command: &str) -> Result<(String, PathBuf)> {
    let text = fs::read_to_string(path)?;
    let is_manifest = text
        .parse::<toml::Table>()
        .map(|t| t.contains_key("manifest") && t.contains_key("artifacts"))
        .unwrap_or(false);
    if is_manifest {
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        if m.manifest.command != command {
            return Err(Error::Config(format!(
                "manifest was written by `{}`, not `{command}`",
                m.manifest.command
            )));
        }
        if sha256_hex(m.manifest.config.as_bytes()) != m.manifest.config_sha256 {
            return Err(Error::Config("manifest config does not match its hash".into()));
        }
        return Ok((m.manifest.config, m.manifest.config_dir));
    }
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let base = fs::canonicalize(base)?;
    Ok((text, base))
}

/// Applies the output-root override: relative directories are placed under
/// `root`, absolute ones keep only their last component.
pub fn redirect_output(dir: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        None => dir.to_path_buf(),
        Some(root) if dir.is_relative() => root.join(dir),
        Some(root) => root.join(dir.file_name().unwrap_or_default()),
    }
}
