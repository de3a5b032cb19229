//! Run manifests: config hash, seed list, versions, per-file checksums.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub config_sha256: String,
    pub seeds: Vec<u64>,
    pub versions: BTreeMap<String, String>,
    /// filename -> sha256 of every report file in the run directory.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Write `manifest.json` for a completed run directory.
pub fn emit_manifest(
    run_dir: &Path,
    scenario: &str,
    config_json: &str,
    seeds: &[u64],
) -> std::io::Result<Manifest> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(run_dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name == "manifest.json" || name == "run.log" {
            continue;
        }
        let bytes = fs::read(entry.path())?;
        files.insert(name, sha256_hex(&bytes));
    }
    let mut versions = BTreeMap::new();
    versions.insert("coverlab".into(), env!("CARGO_PKG_VERSION").to_string());
    let manifest = Manifest {
        scenario: scenario.to_string(),
        config_sha256: sha256_hex(config_json.as_bytes()),
        seeds: seeds.to_vec(),
        versions,
        files,
    };
    fs::write(run_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Re-hash every file listed in the manifest; returns mismatched names.
pub fn verify_manifest(run_dir: &Path) -> std::io::Result<Vec<String>> {
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json"))?)?;
    let mut bad = Vec::new();
    for (name, want) in &manifest.files {
        match fs::read(run_dir.join(name)) {
            Ok(bytes) if &sha256_hex(&bytes) == want => {}
            _ => bad.push(name.clone()),
        }
    }
    Ok(bad)
}
