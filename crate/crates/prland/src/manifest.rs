use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Provenance record written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub rng: String,
    pub seeds: Vec<u64>,
    pub platform: String,
    pub created_unix: u64,
    pub elapsed_seconds: f64,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub details: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects provenance while a command runs.
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    outputs: Vec<String>,
    details: serde_json::Value,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            seeds: Vec::new(),
            outputs: Vec::new(),
            details: serde_json::Value::Null,
            start: Instant::now(),
        }
    }

    pub fn seeds(&mut self, seeds: impl IntoIterator<Item = u64>) -> &mut Self {
        self.seeds.extend(seeds);
        self
    }

    pub fn output(&mut self, name: impl Into<String>) -> &mut Self {
        self.outputs.push(name.into());
        self
    }

    pub fn details(&mut self, details: serde_json::Value) -> &mut Self {
        self.details = details;
        self
    }

    pub fn finish(&self) -> Manifest {
        let canonical = serde_json::to_string(&self.config).expect("config serializes");
        Manifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: sha256_hex(canonical.as_bytes()),
            config: self.config.clone(),
            rng: prland_core::model::RNG_ID.to_string(),
            seeds: self.seeds.clone(),
            platform: format!("{}-{}", std::env::consts::ARCH, std::env::consts::OS),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            outputs: self.outputs.clone(),
            details: self.details.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<Manifest> {
        let m = self.finish();
        crate::io::write_json(&dir.join("manifest.json"), &m)?;
        Ok(m)
    }
}
