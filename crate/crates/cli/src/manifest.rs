//! Reproducibility manifest and content hashing.

use std::collections::BTreeMap;
use std::path::Path;

use cfproc_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Hash of stage name, configuration, seed and input hashes.
    pub key: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: serde_json::Value,
    /// Hash of the input CSV at the last ingest.
    pub input_hash: Option<String>,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn load_or_new(dir: &Path) -> Result<Self, Error> {
        let p = dir.join(MANIFEST_FILE);
        if !p.exists() {
            return Ok(RunManifest { tool_version: env!("CARGO_PKG_VERSION").into(), ..Default::default() });
        }
        let bytes = std::fs::read(&p)?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<(), Error> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    /// Stage that recorded `artifact` as an output, with the recorded hash.
    pub fn producer(&self, artifact: &str) -> Option<(&str, &str)> {
        self.stages
            .iter()
            .find_map(|(name, r)| r.outputs.get(artifact).map(|h| (name.as_str(), h.as_str())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(sha256_hex(&bytes))
}

/// Per-stage seed: the first eight bytes of `sha256("{global}:{stage}")`.
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    let d = Sha256::digest(format!("{global}:{stage}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}
