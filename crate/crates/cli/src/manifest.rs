use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Provenance block embedded in every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective configuration in config-file form.
    pub config_snapshot: BTreeMap<String, String>,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(command: &str, config_snapshot: BTreeMap<String, String>) -> Self {
        RunManifest {
            command: command.to_string(),
            config_snapshot,
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// Read an input file, recording its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        self.input_digests
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }
}
