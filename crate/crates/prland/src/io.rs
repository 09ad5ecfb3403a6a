//! File formats: the binary instance container, CSV tables and atomic
//! writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use prland_core::model::{Instance, SensingNorm};
use serde::Serialize;

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"PRLINST1";

/// Writes `bytes` to a sibling temp file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    let tmp = path.with_extension("tmp~");
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Little-endian layout:
///
/// ```text
/// magic   8 bytes  "PRLINST1"
/// n       u64
/// m       u64
/// seed    u64
/// norm    u8       0 = variance 1/N, 1 = exact unit rows
/// signal  n  x f64
/// sensing m*n x f64, row-major
/// ```
pub fn encode_instance(inst: &Instance) -> Vec<u8> {
    let mut out = Vec::with_capacity(33 + 8 * (inst.n() + inst.sensing().len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(inst.n() as u64).to_le_bytes());
    out.extend_from_slice(&(inst.m() as u64).to_le_bytes());
    out.extend_from_slice(&inst.seed().to_le_bytes());
    out.push(match inst.sensing_norm() {
        SensingNorm::Variance => 0,
        SensingNorm::ExactUnit => 1,
    });
    for v in inst.signal().iter().chain(inst.sensing()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_instance(bytes: &[u8]) -> CliResult<Instance> {
    let bad = |m: &str| CliError::Format(format!("instance file: {m}"));
    if bytes.len() < 33 || &bytes[..8] != MAGIC {
        return Err(bad("missing header"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let (n, m, seed) = (word(8) as usize, word(16) as usize, word(24));
    if bytes[32] > 1 {
        return Err(bad("unknown normalization tag"));
    }
    let count = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_add(n))
        .ok_or_else(|| bad("dimensions overflow"))?;
    if bytes.len() != 33 + 8 * count {
        return Err(bad("length does not match dimensions"));
    }
    let mut vals = bytes[33..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let signal: Vec<f64> = vals.by_ref().take(n).collect();
    let sensing: Vec<f64> = vals.collect();
    Ok(Instance::from_parts(n, signal, sensing, seed)?)
}

pub fn save_instance(path: &Path, inst: &Instance) -> CliResult<()> {
    write_atomic(path, &encode_instance(inst))
}

pub fn load_instance(path: &Path) -> CliResult<Instance> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    decode_instance(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}

/// Serializes rows with a header into a CSV file, atomically.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Format(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.display().to_string()));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}
