//! Output directory: CSV tables, JSON reports, optional gnuplot scripts and
//! a manifest. Data files carry no timestamps, so reruns with the same
//! configuration are byte-identical; only `manifest.json` records the time.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

/// Shortest round-trip representation with a decimal point or exponent,
/// independent of locale.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        let digest = Sha256::digest(bytes);
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(path)
    }

    /// Numeric table with a header row.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let csv_err = |e: csv::Error| CliError::io(&path, e.into());
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(row.iter().map(|&v| fmt_f64(v))).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(self.dir.join(name), e.into()))?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `manifest.json`: command, effective configuration, creation
    /// time and a checksum for every file written.
    pub fn finish(self, command: &str, config: &RunConfig, notes: &[String]) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            tool: &'a str,
            version: &'a str,
            command: &'a str,
            created_utc: String,
            config: &'a RunConfig,
            files: &'a [FileEntry],
            notes: &'a [String],
        }
        let manifest = Manifest {
            tool: "lacpump",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_utc: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config,
            files: &self.files,
            notes,
        };
        let path = self.dir.join(MANIFEST);
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::io(&path, e.into()))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.0, 1.0, -517.395, 1e-7, 3.412807508176518e-3, 2.5e20] {
            let s = fmt_f64(v);
            assert!(s.contains('.') || s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn table_and_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.write_table("t.csv", &["a", "b"], &[vec![1.0, 2.5]]).unwrap();
        let text = std::fs::read_to_string(tmp.path().join("t.csv")).unwrap();
        assert_eq!(text, "a,b\n1.0,2.5\n");
        assert_eq!(out.files()[0].bytes, text.len() as u64);
        assert_eq!(out.files()[0].sha256.len(), 64);
        out.write_table("empty.csv", &["a"], &[]).unwrap();
        assert_eq!(std::fs::read_to_string(tmp.path().join("empty.csv")).unwrap(), "a\n");
    }
}
