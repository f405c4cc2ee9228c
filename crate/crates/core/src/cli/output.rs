//! Result files: atomic writes and the reproducibility header.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::linalg::CMat;

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub grid_n: usize,
    pub log_base: String,
    pub tolerances: BTreeMap<String, f64>,
}

impl Header {
    /// `config_hash` is the SHA-256 of the canonical spec text and run settings.
    pub fn new(command: &str, canonical_spec: &str, grid_n: usize, log_base: &str, tolerances: BTreeMap<String, f64>) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(canonical_spec.as_bytes());
        hasher.update(format!("\n{command}\n{grid_n}\n{log_base}\n").as_bytes());
        for (k, v) in &tolerances {
            hasher.update(format!("{k}={v:e}\n").as_bytes());
        }
        Self {
            tool: "memcap",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_hash: hex::encode(hasher.finalize()),
            grid_n,
            log_base: log_base.to_string(),
            tolerances,
        }
    }

    /// `# key: value` lines for CSV outputs.
    pub fn comment_block(&self) -> String {
        let mut s = format!(
            "# tool: {} {}\n# command: {}\n# config_hash: {}\n# grid_n: {}\n# log_base: {}\n",
            self.tool, self.version, self.command, self.config_hash, self.grid_n, self.log_base
        );
        for (k, v) in &self.tolerances {
            s.push_str(&format!("# tol.{k}: {v:e}\n"));
        }
        s
    }
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

/// `theta` followed by row-major `re`/`im` pairs of every PSD matrix.
pub fn psd_csv(header: &Header, nodes: &[f64], psd: &[CMat]) -> String {
    let mut out = header.comment_block();
    let n = psd.first().map_or(0, |m| m.nrows());
    let mut cols = vec!["theta".to_string()];
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("r{i}{j}_re"));
            cols.push(format!("r{i}{j}_im"));
        }
    }
    out.push_str(&cols.join(","));
    out.push('\n');
    for (theta, m) in nodes.iter().zip(psd) {
        let mut row = vec![format!("{theta:.17e}")];
        for i in 0..n {
            for j in 0..n {
                row.push(format!("{:.17e}", m[(i, j)].re));
                row.push(format!("{:.17e}", m[(i, j)].im));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_settings() {
        let a = Header::new("capacity", "{}", 64, "nats", BTreeMap::new());
        let b = Header::new("capacity", "{}", 128, "nats", BTreeMap::new());
        assert_ne!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 64);
        assert!(a.comment_block().starts_with("# tool: memcap"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "x.txt", "one").unwrap();
        write_atomic(dir.path(), "x.txt", "two").unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("x.txt")).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
