//! Persistent response cache, one JSON file per entry.
//!
//! Layout: `<dir>/<first two hex chars>/<digest>.json`. Writes go to a
//! temporary file in the same directory and are renamed into place, so a
//! reader never observes a partial entry and concurrent writers of the same
//! key leave exactly one intact file behind.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::BackendError;
use crate::domain::fingerprint;

/// A cached request/response pair. Snapshots are canonical JSON text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    #[serde(rename = "request")]
    pub request_snapshot: String,
    #[serde(rename = "response")]
    pub response_snapshot: String,
    pub created_at: DateTime<Utc>,
}

impl CacheEntry {
    pub fn new(request_snapshot: String, response_snapshot: String) -> Self {
        Self {
            key: fingerprint(request_snapshot.as_bytes()),
            request_snapshot,
            response_snapshot,
            created_at: Utc::now(),
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.key == fingerprint(self.request_snapshot.as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CacheStats {
    pub entries: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct FileCache {
    dir: PathBuf,
}

fn storage(context: &str, path: &Path, err: impl std::fmt::Display) -> BackendError {
    BackendError::Storage(format!("{context} {}: {err}", path.display()))
}

impl FileCache {
    /// Opens (creating if needed) a cache rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, BackendError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| storage("cannot create cache directory", &dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, key: &str) -> PathBuf {
        let shard = key.get(..2).unwrap_or("__");
        self.dir.join(shard).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, BackendError> {
        let path = self.entry_path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(storage("cannot read", &path, e)),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes).map_err(|e| storage("corrupt entry", &path, e))?;
        if entry.key != key || !entry.is_consistent() {
            return Err(storage("entry does not match its key", &path, key));
        }
        Ok(Some(entry))
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), BackendError> {
        let path = self.entry_path(&entry.key);
        let shard = path.parent().expect("entry path has a shard directory");
        fs::create_dir_all(shard).map_err(|e| storage("cannot create", shard, e))?;
        let mut bytes = serde_json::to_vec_pretty(entry).map_err(|e| storage("cannot encode", &path, e))?;
        bytes.push(b'\n');
        let mut tmp = tempfile::NamedTempFile::new_in(shard).map_err(|e| storage("cannot write in", shard, e))?;
        tmp.write_all(&bytes).map_err(|e| storage("cannot write", tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| storage("cannot sync", tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| storage("cannot rename into", &path, e.error))?;
        Ok(())
    }

    fn entry_files(&self) -> Result<Vec<PathBuf>, BackendError> {
        let mut files = Vec::new();
        let shards = match fs::read_dir(&self.dir) {
            Ok(s) => s,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(files),
            Err(e) => return Err(storage("cannot list", &self.dir, e)),
        };
        for shard in shards {
            let shard = shard.map_err(|e| storage("cannot list", &self.dir, e))?.path();
            if !shard.is_dir() {
                continue;
            }
            for f in fs::read_dir(&shard).map_err(|e| storage("cannot list", &shard, e))? {
                let f = f.map_err(|e| storage("cannot list", &shard, e))?.path();
                if f.extension().is_some_and(|x| x == "json") {
                    files.push(f);
                }
            }
        }
        files.sort();
        Ok(files)
    }

    pub fn stats(&self) -> Result<CacheStats, BackendError> {
        let mut stats = CacheStats::default();
        for f in self.entry_files()? {
            stats.entries += 1;
            stats.bytes += fs::metadata(&f).map(|m| m.len()).unwrap_or(0);
        }
        Ok(stats)
    }

    /// Removes every entry; returns how many were deleted.
    pub fn clear(&self) -> Result<u64, BackendError> {
        let files = self.entry_files()?;
        for f in &files {
            fs::remove_file(f).map_err(|e| storage("cannot remove", f, e))?;
            if let Some(shard) = f.parent() {
                let _ = fs::remove_dir(shard);
            }
        }
        Ok(files.len() as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_then_get_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FileCache::open(dir.path()).unwrap();
        let e = CacheEntry::new(r#"{"prompt":"p"}"#.into(), r#"{"text":"t"}"#.into());
        cache.put(&e).unwrap();
        assert_eq!(cache.get(&e.key).unwrap(), Some(e.clone()));
        let path = cache.entry_path(&e.key);
        assert!(path.starts_with(dir.path().join(&e.key[..2])));
        assert_eq!(cache.stats().unwrap().entries, 1);
        assert_eq!(cache.clear().unwrap(), 1);
        assert_eq!(cache.get(&e.key).unwrap(), None);
    }

    #[test]
    fn unknown_key_is_absent() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FileCache::open(dir.path()).unwrap();
        assert_eq!(cache.get(&fingerprint(b"nothing")).unwrap(), None);
    }

    #[test]
    fn tampered_entry_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FileCache::open(dir.path()).unwrap();
        let e = CacheEntry::new("a".into(), "b".into());
        cache.put(&e).unwrap();
        let path = cache.entry_path(&e.key);
        let text = fs::read_to_string(&path).unwrap().replace("\"a\"", "\"z\"");
        fs::write(&path, text).unwrap();
        assert!(matches!(cache.get(&e.key), Err(BackendError::Storage(_))));
    }

    #[test]
    fn unwritable_directory_is_a_storage_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        assert!(matches!(FileCache::open(&blocker), Err(BackendError::Storage(_))));
        let cache = FileCache { dir: blocker.join("nested") };
        let e = CacheEntry::new("a".into(), "b".into());
        assert!(matches!(cache.put(&e), Err(BackendError::Storage(_))));
    }
}
