use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::Failure;

/// Parsed input together with the digest of its bytes.
pub struct Input<T> {
    pub value: T,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<Input<T>, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&bytes, &path.display().to_string())
}

/// A JSON value given inline (`[` or `{` first) or as a file path.
pub fn read_json_arg<T: DeserializeOwned>(arg: &str) -> Result<Input<T>, Failure> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        parse(trimmed.as_bytes(), "inline argument")
    } else {
        read_json(Path::new(arg))
    }
}

fn parse<T: DeserializeOwned>(bytes: &[u8], origin: &str) -> Result<Input<T>, Failure> {
    let value = serde_json::from_slice(bytes).map_err(|e| Failure::usage(format!("schema error in {origin}: {e}")))?;
    Ok(Input { value, sha256: sha256_hex(bytes) })
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| Failure::usage(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// `f.json` -> `f.report.json`, next to the output.
pub fn default_report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}.report.json"))
}

/// Twelve significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}
