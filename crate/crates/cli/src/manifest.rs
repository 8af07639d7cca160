use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the channel file (or of the built-in name).
    pub channel_sha256: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub generator: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub source: String,
    pub builtin: bool,
    pub sha256: String,
}

impl InputDigest {
    /// Hashes the file at `source`, or the name itself for built-ins and
    /// anything that is not a readable file.
    pub fn of(role: &str, source: &str) -> Self {
        let (bytes, builtin) = match std::fs::read(Path::new(source)) {
            Ok(b) => (b, false),
            Err(_) => (source.as_bytes().to_vec(), true),
        };
        InputDigest {
            role: role.to_string(),
            source: source.to_string(),
            builtin,
            sha256: hex::encode(Sha256::digest(&bytes)),
        }
    }

    pub fn still_matches(&self) -> bool {
        InputDigest::of(&self.role, &self.source) == *self
    }
}

#[derive(Debug, Default)]
pub struct ManifestBuilder {
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub generator: Option<String>,
    pub tolerances: BTreeMap<String, f64>,
}

impl ManifestBuilder {
    pub fn input(&mut self, role: &str, source: &str) {
        self.inputs.push(InputDigest::of(role, source));
    }

    pub fn seed(&mut self, seed: u64) {
        if !self.seeds.contains(&seed) {
            self.seeds.push(seed);
        }
        self.generator = Some(idbounds_core::rng::GENERATOR_NAME.to_string());
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.to_string(), value);
    }

    pub fn finish(self, command_line: Vec<String>, wall_clock_seconds: f64) -> RunManifest {
        RunManifest {
            command_line,
            channel_sha256: self
                .inputs
                .iter()
                .find(|i| i.role == "channel")
                .map(|i| i.sha256.clone()),
            inputs: self.inputs,
            seeds: self.seeds,
            generator: self.generator,
            tolerances: self.tolerances,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_seconds,
            units: "nats".to_string(),
        }
    }
}
