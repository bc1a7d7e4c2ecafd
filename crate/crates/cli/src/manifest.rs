use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.txt";

/// Everything needed to rerun a command, as a `key=value` file that
/// `--config` accepts.
#[derive(Debug)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self { entries: Vec::new() };
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn extend<K: AsRef<str>>(&mut self, entries: &[(K, String)]) {
        for (k, v) in entries {
            self.set(k.as_ref(), v);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let body = tama_core::config::render(&self.entries);
        let path = dir.join(FILE_NAME);
        std::fs::write(
            &path,
            format!("# tama run manifest; replay with --config {FILE_NAME}\n{body}"),
        )
        .with_context(|| format!("writing {}", path.display()))
    }
}

/// SHA-256 over the files in order, each prefixed by its byte length.
pub fn fingerprint(paths: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}
