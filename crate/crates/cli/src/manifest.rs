use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use sncf_core::PipelineConfig;

use crate::error::{io_error, CliResult};

/// Content hash of one input file.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    /// First 64 bits of the SHA-256 of the file, as 16 hex digits.
    pub digest: String,
    pub bytes: u64,
}

/// Provenance block embedded in every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub config: Option<PipelineConfig>,
    pub inputs: Vec<InputDigest>,
    /// Only recorded with `--record-timing`, so reports stay reproducible.
    pub wall_clock_seconds: Option<f64>,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_file(role: &str, path: &Path) -> CliResult<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(InputDigest {
        role: role.to_string(),
        digest: digest_bytes(&bytes),
        bytes: bytes.len() as u64,
    })
}

pub struct ManifestBuilder {
    subcommand: &'static str,
    start: Instant,
    record_timing: bool,
    seed: Option<u64>,
    config: Option<PipelineConfig>,
    inputs: Vec<InputDigest>,
}

impl ManifestBuilder {
    pub fn new(subcommand: &'static str, record_timing: bool) -> Self {
        Self {
            subcommand,
            start: Instant::now(),
            record_timing,
            seed: None,
            config: None,
            inputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(&mut self, cfg: &PipelineConfig) -> &mut Self {
        self.seed = Some(cfg.seed);
        self.config = Some(cfg.clone());
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<&mut Self> {
        self.inputs.push(digest_file(role, path)?);
        Ok(self)
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            wall_clock_seconds: self.record_timing.then(|| self.start.elapsed().as_secs_f64()),
        }
    }
}
