//! JSON sidecars written next to every output file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use vehchan::Result;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&fs::read(path)?),
    })
}

#[derive(Serialize)]
struct Sidecar<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: Option<u64>,
    /// SHA-256 of the canonical JSON of `inputs` and `config`.
    config_hash: String,
    inputs: &'a [InputDigest],
    config: &'a C,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Hash of the inputs and configuration of a run.
pub fn config_hash<C: Serialize>(inputs: &[InputDigest], config: &C) -> String {
    // serde_json writes struct fields in declaration order, so the encoding
    // is stable for a given build.
    let canonical = serde_json::to_vec(&(inputs, config)).expect("configuration serializes");
    sha256_hex(&canonical)
}

pub fn write_sidecar<C: Serialize>(
    out: &Path,
    command: &str,
    seed: Option<u64>,
    inputs: &[InputDigest],
    config: &C,
) -> Result<()> {
    let sidecar = Sidecar {
        tool: "vehchan",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config_hash: config_hash(inputs, config),
        inputs,
        config,
    };
    let mut text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    text.push('\n');
    fs::write(sidecar_path(out), text)?;
    Ok(())
}
