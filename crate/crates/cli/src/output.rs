use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// Files of one run, held in memory until the run has succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> serde_json::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files
            .iter()
            .map(|(name, bytes)| FileDigest { file: name.clone(), bytes: bytes.len(), sha256: sha256_hex(bytes) })
            .collect()
    }

    /// Writes every file to a temporary name in `dir`, then renames them all,
    /// then the manifest last. On failure the temporaries are removed.
    pub fn commit<M: Serialize>(self, dir: &Path, manifest: &M) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut all = self.files;
        let mut m = serde_json::to_vec_pretty(manifest).map_err(io::Error::other)?;
        m.push(b'\n');
        all.push(("manifest.json".into(), m));
        let tmp = |name: &str| dir.join(format!(".{name}.{}.tmp", std::process::id()));
        let mut written: Vec<PathBuf> = Vec::new();
        let result = (|| {
            for (name, bytes) in &all {
                let p = tmp(name);
                fs::write(&p, bytes)?;
                written.push(p);
            }
            for (name, _) in &all {
                fs::rename(tmp(name), dir.join(name))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for p in written {
                let _ = fs::remove_file(p);
            }
        }
        result
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// CSV bytes from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> csv::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_files_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outputs::default();
        o.add("a.csv", b"x\n1\n".to_vec());
        let digests = o.digests();
        assert_eq!(digests[0].sha256, sha256_hex(b"x\n1\n"));
        o.commit(dir.path(), &serde_json::json!({"ok": true})).unwrap();
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"x\n1\n");
        assert!(dir.path().join("manifest.json").exists());
        let leftovers = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"));
        assert_eq!(leftovers.count(), 0);
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        let b = csv_bytes(&["r", "g"], [vec![num(0.5), num(2.0)]]).unwrap();
        assert_eq!(String::from_utf8(b).unwrap(), "r,g\n5e-1,2e0\n");
    }
}
