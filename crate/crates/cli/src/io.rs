//! Data files, the run manifest and input tables.
//!
//! Numeric tables are written either as CSV with a header row or in a
//! compact binary layout:
//!
//! ```text
//! b"RECOILB1"
//! u32 column count, then per column: u32 byte length + UTF-8 name
//! u64 row count
//! f64 values, row-major
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::spec::Format;

pub const BINARY_MAGIC: &[u8; 8] = b"RECOILB1";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs { path: path.into(), source }
}

fn malformed(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.into(), reason: reason.into() }
}

/// Named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).expect("in-memory write");
        }
        w.into_inner().expect("in-memory write")
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.rows.len() * self.columns.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&(self.columns.len() as u32).to_le_bytes());
        for c in &self.columns {
            out.extend_from_slice(&(c.len() as u32).to_le_bytes());
            out.extend_from_slice(c.as_bytes());
        }
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for row in &self.rows {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn encode(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Binary => self.to_binary(),
        }
    }

    pub fn from_csv(bytes: &[u8], path: &Path) -> Result<Self, IoError> {
        let mut r = csv::Reader::from_reader(bytes);
        let columns: Vec<String> =
            r.headers().map_err(|e| malformed(path, e.to_string()))?.iter().map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| malformed(path, format!("row {}: {e}", i + 1)))?;
            if row.len() != columns.len() {
                return Err(malformed(path, format!("row {} has {} fields", i + 1, row.len())));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn from_binary(bytes: &[u8], path: &Path) -> Result<Self, IoError> {
        let mut cur = bytes.strip_prefix(BINARY_MAGIC.as_slice()).ok_or_else(|| malformed(path, "bad magic"))?;
        let mut take = |n: usize| -> Result<&[u8], IoError> {
            if cur.len() < n {
                return Err(malformed(path, "truncated"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        let ncols = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let mut columns = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            let len = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
            let name = std::str::from_utf8(take(len)?).map_err(|_| malformed(path, "column name is not UTF-8"))?;
            columns.push(name.to_string());
        }
        let nrows = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let mut rows = Vec::with_capacity(nrows);
        for _ in 0..nrows {
            let raw = take(8 * ncols)?;
            rows.push(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect());
        }
        Ok(Self { columns, rows })
    }

    /// Reads a table written in either format.
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let bytes = fs::read(path).map_err(fs_err(path))?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes, path)
        } else {
            Self::from_csv(&bytes, path)
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Index of every file a run wrote.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub spec_sha256: String,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self, IoError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(fs_err(&path))?;
        serde_json::from_str(&text).map_err(|e| malformed(&path, e.to_string()))
    }
}

/// Output directory of one run; records what it writes for the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    format: Format,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, format: Format) -> Result<Self, IoError> {
        fs::create_dir_all(root).map_err(fs_err(root))?;
        Ok(Self { root: root.into(), format, entries: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn write_bytes(&mut self, name: String, bytes: &[u8]) -> Result<(), IoError> {
        let path = self.root.join(&name);
        fs::write(&path, bytes).map_err(fs_err(&path))?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ManifestEntry { path: name, sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// Writes `<stem>.csv` or `<stem>.bin`; returns the file name.
    pub fn write_table(&mut self, stem: &str, table: &Table) -> Result<String, IoError> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Binary => "bin",
        };
        let name = format!("{stem}.{ext}");
        self.write_bytes(name.clone(), &table.encode(self.format))?;
        Ok(name)
    }

    pub fn write_json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<(), IoError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable report");
        text.push('\n');
        self.write_bytes(name.to_string(), text.as_bytes())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(self, name: &str, spec_text: &str) -> Result<Manifest, IoError> {
        let mut files = self.entries;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { name: name.into(), spec_sha256: sha256_hex(spec_text.as_bytes()), files };
        let mut text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(fs_err(&path))?;
        Ok(manifest)
    }
}

/// Reads a two-column `x,value` table and interpolates it linearly at `xs`.
/// Points outside the table take the nearest end value.
pub fn read_profile(path: &Path, xs: impl Iterator<Item = f64>) -> Result<Vec<f64>, IoError> {
    let t = Table::read(path)?;
    if t.columns.len() != 2 || t.rows.len() < 2 {
        return Err(malformed(path, "expected two columns x,value and at least two rows"));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = t.rows.iter().map(|r| (r[0], r[1])).unzip();
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(malformed(path, "x must be strictly increasing"));
    }
    Ok(xs
        .map(|q| {
            let k = x.partition_point(|&s| s <= q).clamp(1, x.len() - 1) - 1;
            let w = ((q - x[k]) / (x[k + 1] - x[k])).clamp(0.0, 1.0);
            y[k] + w * (y[k + 1] - y[k])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["t", "x", "rho"]);
        t.push(vec![0.0, -1.5, 0.125]);
        t.push(vec![0.1, 2.0, 1e-300]);
        t.push(vec![0.2, f64::MIN_POSITIVE, -0.3]);
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let bytes = t.to_csv();
        assert!(bytes.starts_with(b"t,x,rho\n0,-1.5,0.125\n"));
        assert_eq!(Table::from_csv(&bytes, Path::new("a.csv")).unwrap(), t);
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let t = sample();
        let bytes = t.to_binary();
        assert_eq!(&bytes[..8], BINARY_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 8 + 4 + 3 * 4 + 1 + 1 + 3 + 8 + 9 * 8);
        assert_eq!(Table::from_binary(&bytes, Path::new("a.bin")).unwrap(), t);
        assert!(Table::from_binary(&bytes[..bytes.len() - 1], Path::new("a.bin")).is_err());
    }

    #[test]
    fn manifest_lists_every_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), Format::Csv).unwrap();
        out.write_table("msd_sde", &sample()).unwrap();
        out.write_json("report.json", &serde_json::json!({"a": 1})).unwrap();
        let m = out.finish("demo", "spec").unwrap();
        assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["msd_sde.csv", "report.json"]);
        assert_eq!(Manifest::read(dir.path()).unwrap(), m);
        let bytes = fs::read(dir.path().join("msd_sde.csv")).unwrap();
        assert_eq!(m.files[0].sha256, sha256_hex(&bytes));
    }

    #[test]
    fn profile_interpolation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        fs::write(&path, "x,omega\n0,0\n1,2\n3,2\n").unwrap();
        let v = read_profile(&path, [-1.0, 0.5, 2.0, 9.0].into_iter()).unwrap();
        assert_eq!(v, [0.0, 1.0, 2.0, 2.0]);
        fs::write(&path, "x,omega\n1,0\n0,2\n").unwrap();
        assert!(read_profile(&path, [0.0].into_iter()).is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
