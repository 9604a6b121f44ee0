use std::fs;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance of one CLI run. Every output file refers to it by name.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub input: String,
    pub input_sha256: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value, seed: Option<u64>, input: &Path) -> anyhow::Result<Self> {
        let bytes = fs::read(input).map_err(|e| {
            anyhow::Error::new(rankhaz::Error::Validation(format!("cannot read {}: {e}", input.display())))
        })?;
        Ok(Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            input: input.display().to_string(),
            input_sha256: sha256_hex(&bytes),
            started: now(),
            finished: String::new(),
            outputs: Vec::new(),
        })
    }

    /// Writes `contents` to `out_dir/name` and records it.
    pub fn emit(&mut self, out_dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
        fs::write(out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self, out_dir: &Path) -> anyhow::Result<()> {
        self.finished = now();
        fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&self)? + "\n")?;
        Ok(())
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Wraps a JSON payload with a reference to the manifest.
pub fn with_manifest_ref<T: Serialize>(payload: &T) -> anyhow::Result<String> {
    let mut value = serde_json::to_value(payload)?;
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("manifest".into(), MANIFEST_FILE.into());
    }
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
