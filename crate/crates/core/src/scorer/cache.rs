use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ScorerError;

/// Hex SHA-256 of the backend id and the full prompt.
pub fn cache_key(backend_id: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(backend_id.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CachedResponse {
    pub backend_id: String,
    pub prompt: String,
    pub response: String,
}

/// Content-addressed response files, `<dir>/<key[..2]>/<key>.json`.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

fn cache_err(path: &Path, message: impl ToString) -> ScorerError {
    ScorerError::Cache {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, ScorerError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| cache_err(&dir, e))?;
        Ok(Self {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, backend_id: &str, prompt: &str) -> Result<Option<String>, ScorerError> {
        let path = self.path_for(&cache_key(backend_id, prompt));
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        let entry: CachedResponse = serde_json::from_slice(&bytes).map_err(|e| cache_err(&path, e))?;
        if entry.backend_id != backend_id || entry.prompt != prompt {
            return Err(cache_err(&path, "entry does not match its key"));
        }
        Ok(Some(entry.response))
    }

    /// Written to a temporary file first and renamed into place.
    pub fn put(&self, backend_id: &str, prompt: &str, response: &str) -> Result<(), ScorerError> {
        let key = cache_key(backend_id, prompt);
        let path = self.path_for(&key);
        let parent = path.parent().expect("cache path has a parent");
        let entry = CachedResponse {
            backend_id: backend_id.to_string(),
            prompt: prompt.to_string(),
            response: response.to_string(),
        };
        let body = serde_json::to_vec_pretty(&entry).map_err(|e| cache_err(&path, e))?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(parent).map_err(|e| cache_err(parent, e))?;
        let tmp = parent.join(format!(".{key}.{}.tmp", std::process::id()));
        let mut f = fs::File::create(&tmp).map_err(|e| cache_err(&tmp, e))?;
        f.write_all(&body)
            .and_then(|_| f.sync_all())
            .map_err(|e| cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| cache_err(&path, e))
    }

    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.dir) else {
            return 0;
        };
        shards
            .flatten()
            .filter_map(|s| fs::read_dir(s.path()).ok())
            .flat_map(|d| d.flatten())
            .filter(|f| f.path().extension().is_some_and(|x| x == "json"))
            .count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_key_separation() {
        let dir = tempfile::tempdir().unwrap();
        let c = ResponseCache::open(dir.path().join("c")).unwrap();
        assert!(c.is_empty());
        c.put("a", "prompt", "YES\nfine").unwrap();
        assert_eq!(c.get("a", "prompt").unwrap().as_deref(), Some("YES\nfine"));
        assert_eq!(c.get("b", "prompt").unwrap(), None);
        assert_ne!(cache_key("ab", "c"), cache_key("a", "bc"));
        c.put("a", "prompt", "NO").unwrap();
        assert_eq!(c.get("a", "prompt").unwrap().as_deref(), Some("NO"));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn corrupt_entry_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let c = ResponseCache::open(dir.path()).unwrap();
        c.put("a", "p", "YES").unwrap();
        let key = cache_key("a", "p");
        fs::write(dir.path().join(&key[..2]).join(format!("{key}.json")), b"{").unwrap();
        assert!(c.get("a", "p").is_err());
    }
}
