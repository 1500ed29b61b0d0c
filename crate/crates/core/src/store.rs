//! Content-addressed artifact store with a manifest.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::thread::sleep;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::sha256_hex;

pub const STORE_SCHEMA_VERSION: u32 = 1;
const LOCK_NAME: &str = ".lock";
const LOCK_TIMEOUT: Duration = Duration::from_secs(60);

/// Hash of the canonical JSON encoding of `v`.
pub fn hash_json<T: Serialize + ?Sized>(v: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(v)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: String,
    pub key: String,
    pub path: String,
    pub sha256: String,
    pub command: String,
    pub inputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub artifacts: BTreeMap<String, ManifestEntry>,
    /// Named pointers to the latest artifact of an incrementally updated
    /// series.
    #[serde(default)]
    pub refs: BTreeMap<String, String>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            schema_version: STORE_SCHEMA_VERSION,
            artifacts: BTreeMap::new(),
            refs: BTreeMap::new(),
        }
    }
}

/// Advisory lock held while the manifest is rewritten.
struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(root: &Path) -> Result<Self> {
        let path = root.join(LOCK_NAME);
        let start = Instant::now();
        loop {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(LockGuard { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    if start.elapsed() > LOCK_TIMEOUT {
                        return Err(Error::Invalid(format!(
                            "store lock {} held for too long",
                            path.display()
                        )));
                    }
                    sleep(Duration::from_millis(20));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        Ok(RunStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn manifest(&self) -> Result<Manifest> {
        match fs::read_to_string(self.manifest_path()) {
            Ok(text) => {
                let m: Manifest = serde_json::from_str(&text)?;
                if m.schema_version != STORE_SCHEMA_VERSION {
                    return Err(Error::Schema {
                        found: m.schema_version,
                        expected: STORE_SCHEMA_VERSION,
                    });
                }
                Ok(m)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(e.into()),
        }
    }

    fn relative(kind: &str, key: &str, ext: &str) -> String {
        format!("objects/{kind}/{key}.{ext}")
    }

    pub fn path_of(&self, kind: &str, key: &str, ext: &str) -> PathBuf {
        self.root.join(Self::relative(kind, key, ext))
    }

    /// Bytes of a stored artifact, if present.
    pub fn get(&self, kind: &str, key: &str, ext: &str) -> Result<Option<Vec<u8>>> {
        match fs::read(self.path_of(kind, key, ext)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn get_json<T: for<'de> Deserialize<'de>>(
        &self,
        kind: &str,
        key: &str,
    ) -> Result<Option<T>> {
        match self.get(kind, key, "json")? {
            Some(b) => Ok(Some(serde_json::from_slice(&b)?)),
            None => Ok(None),
        }
    }

    /// Stores an artifact under `kind/key` and records it in the manifest.
    /// Existing artifacts are never rewritten.
    pub fn put(
        &self,
        kind: &str,
        key: &str,
        ext: &str,
        bytes: &[u8],
        command: &str,
        inputs: BTreeMap<String, String>,
    ) -> Result<PathBuf> {
        let path = self.path_of(kind, key, ext);
        let _lock = LockGuard::acquire(&self.root)?;
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        let mut m = self.manifest()?;
        let rel = Self::relative(kind, key, ext);
        m.artifacts.entry(rel.clone()).or_insert(ManifestEntry {
            kind: kind.into(),
            key: key.into(),
            path: rel,
            sha256: sha256_hex(&fs::read(&path)?),
            command: command.into(),
            inputs,
        });
        write_atomic(&self.manifest_path(), &serde_json::to_vec_pretty(&m)?)?;
        Ok(path)
    }

    pub fn put_json<T: Serialize>(
        &self,
        kind: &str,
        key: &str,
        v: &T,
        command: &str,
        inputs: BTreeMap<String, String>,
    ) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.put(kind, key, "json", &bytes, command, inputs)
    }

    pub fn set_ref(&self, name: &str, target: &str) -> Result<()> {
        let _lock = LockGuard::acquire(&self.root)?;
        let mut m = self.manifest()?;
        m.refs.insert(name.into(), target.into());
        write_atomic(&self.manifest_path(), &serde_json::to_vec_pretty(&m)?)
    }

    pub fn get_ref(&self, name: &str) -> Result<Option<String>> {
        Ok(self.manifest()?.refs.get(name).cloned())
    }

    /// Writes a human-facing report file (outside the object store).
    pub fn write_report(&self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join("reports").join(rel);
        write_atomic(&path, bytes)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_is_idempotent_and_listed() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunStore::open(dir.path()).unwrap();
        let k = hash_json(&("a", 1)).unwrap();
        let inputs: BTreeMap<String, String> = [("x".to_string(), "1".to_string())].into();
        let p1 = s
            .put("log", &k, "ndjson", b"one\n", "simulate", inputs.clone())
            .unwrap();
        let p2 = s
            .put("log", &k, "ndjson", b"two\n", "simulate", inputs)
            .unwrap();
        assert_eq!(p1, p2);
        assert_eq!(fs::read(&p1).unwrap(), b"one\n");
        let m = s.manifest().unwrap();
        assert_eq!(m.artifacts.len(), 1);
        let e = m.artifacts.values().next().unwrap();
        assert_eq!(e.sha256, sha256_hex(b"one\n"));
        assert!(!dir.path().join(LOCK_NAME).exists());
        assert!(s.get("log", "missing", "ndjson").unwrap().is_none());
        s.set_ref("req", &k).unwrap();
        assert_eq!(s.get_ref("req").unwrap(), Some(k));
    }

    #[test]
    fn concurrent_writers_keep_a_valid_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let s = RunStore::open(dir.path()).unwrap();
        std::thread::scope(|sc| {
            for t in 0..4 {
                let s = s.clone();
                sc.spawn(move || {
                    for i in 0..10 {
                        let key = format!("{t}-{i}");
                        s.put("x", &key, "txt", key.as_bytes(), "test", BTreeMap::new())
                            .unwrap();
                    }
                });
            }
        });
        assert_eq!(s.manifest().unwrap().artifacts.len(), 40);
    }
}
