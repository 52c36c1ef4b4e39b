//! Results-directory plumbing: hashed manifests and raw field snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField};

pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Plain-text manifest: `key: value` header lines, then `<sha256>  <path>` per file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub header: BTreeMap<String, String>,
    /// Relative path to hex digest.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            s.push_str(&format!("{k}: {v}\n"));
        }
        for (path, hash) in &self.files {
            s.push_str(&format!("{hash}  {path}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Manifest::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            if let Some((hash, path)) = line.split_once("  ") {
                if hash.len() == 64 && hash.bytes().all(|b| b.is_ascii_hexdigit()) {
                    m.files.insert(path.to_string(), hash.to_string());
                    continue;
                }
            }
            let (k, v) = line
                .split_once(": ")
                .ok_or_else(|| Error::Config(format!("malformed manifest line '{line}'")))?;
            m.header.insert(k.to_string(), v.to_string());
        }
        Ok(m)
    }

    /// Hashes every listed file under `dir` and writes the manifest there.
    pub fn write(dir: &Path, header: BTreeMap<String, String>, files: &[PathBuf]) -> Result<Self> {
        let mut m = Manifest {
            header,
            files: BTreeMap::new(),
        };
        for rel in files {
            let key = rel.to_string_lossy().replace('\\', "/");
            m.files.insert(key, sha256_file(&dir.join(rel))?);
        }
        fs::write(dir.join(MANIFEST), m.to_text())?;
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(dir.join(MANIFEST))?)
    }

    /// True when every listed file exists under `dir` with the recorded digest.
    pub fn verify(&self, dir: &Path) -> bool {
        self.files
            .iter()
            .all(|(path, hash)| sha256_file(&dir.join(path)).is_ok_and(|h| &h == hash))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub domain_length: f64,
    pub n: usize,
    /// Coordinate of sample 0.
    pub x0: f64,
    pub t: f64,
    pub dtype: String,
}

/// Writes `<stem>.f64` (little-endian samples) and `<stem>.json`; returns both file names.
pub fn write_snapshot(dir: &Path, stem: &str, u: &RealField, t: f64) -> Result<[String; 2]> {
    fs::create_dir_all(dir)?;
    let bin = format!("{stem}.f64");
    let json = format!("{stem}.json");
    let mut bytes = Vec::with_capacity(8 * u.len());
    for v in u.samples() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(&bin), bytes)?;
    let grid = u.grid();
    let meta = SnapshotMeta {
        domain_length: grid.domain_length(),
        n: grid.n(),
        x0: grid.x(0),
        t,
        dtype: "f64le".into(),
    };
    fs::write(dir.join(&json), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok([bin, json])
}

/// Reads a snapshot given the path of either of its two files.
pub fn read_snapshot(path: &Path) -> Result<(RealField, SnapshotMeta)> {
    let bin = path.with_extension("f64");
    let json = path.with_extension("json");
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(&json)?)?;
    if meta.dtype != "f64le" {
        return Err(Error::Config(format!("unsupported snapshot dtype '{}'", meta.dtype)));
    }
    let bytes = fs::read(&bin)?;
    if bytes.len() != 8 * meta.n {
        return Err(Error::Config(format!(
            "snapshot holds {} bytes, expected {}",
            bytes.len(),
            8 * meta.n
        )));
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let grid = Grid::new(meta.domain_length, meta.n)?;
    Ok((RealField::from_samples(&grid, samples)?, meta))
}
