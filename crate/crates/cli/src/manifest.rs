//! Every subcommand records what it read and how it was configured.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// manifest.json: enough to re-run the command and verify its inputs.
/// Wall time lives here and nowhere else, so numeric artifacts stay
/// byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_secs: f64,
}

fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_manifest<C: Serialize>(
    out_dir: &Path,
    command: &str,
    config: &C,
    inputs: &[&Path],
    seed: Option<u64>,
    started: Instant,
) -> anyhow::Result<()> {
    let mut hashed = BTreeMap::new();
    for path in inputs {
        hashed.insert(path.display().to_string(), hash_file(path)?);
    }
    let mut versions = BTreeMap::new();
    versions.insert("simgat".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let manifest = Manifest {
        command: command.to_string(),
        config: serde_json::to_value(config)?,
        inputs: hashed,
        versions,
        seed,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}
