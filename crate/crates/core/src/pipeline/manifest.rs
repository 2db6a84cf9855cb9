use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::hex;

pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-256 of a file's bytes, hex encoded.
pub fn hash_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

/// Record of one stage run: what it read and what it wrote, by content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn key(path: &Path, root: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

pub(crate) fn hash_all(paths: &[PathBuf], root: &Path) -> Result<BTreeMap<String, String>> {
    paths.iter().map(|p| Ok((key(p, root), hash_file(p)?))).collect()
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Option<Self>> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text).ok())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// True when every recorded output still exists with its recorded hash.
    pub fn outputs_intact(&self, root: &Path) -> bool {
        self.outputs.iter().all(|(k, h)| {
            let p = if Path::new(k).is_absolute() { PathBuf::from(k) } else { root.join(k) };
            hash_file(&p).is_ok_and(|got| &got == h)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashes_and_intactness() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("a.txt");
        std::fs::write(&f, "abc").unwrap();
        assert_eq!(hash_file(&f).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let m = Manifest {
            stage: "s".into(),
            config_hash: "c".into(),
            inputs: BTreeMap::new(),
            outputs: hash_all(&[f.clone()], dir.path()).unwrap(),
        };
        assert_eq!(m.outputs.keys().next().unwrap(), "a.txt");
        assert!(m.outputs_intact(dir.path()));
        std::fs::write(&f, "abd").unwrap();
        assert!(!m.outputs_intact(dir.path()));
        let mp = dir.path().join(MANIFEST_FILE);
        m.write(&mp).unwrap();
        assert_eq!(Manifest::read(&mp).unwrap(), Some(m));
    }
}
