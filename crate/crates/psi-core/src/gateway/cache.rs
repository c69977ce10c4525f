use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::client::{ChatClient, ChatRequest, DecodingParams};
use crate::fsutil::sha256_hex;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(model_id: &str, prompt_digest: &str, params: &DecodingParams) -> Self {
        let material = format!("{model_id}\n{prompt_digest}\n{}", params.digest());
        CacheKey(sha256_hex(material.as_bytes()))
    }

    pub fn for_request(client: &dyn ChatClient, request: &ChatRequest) -> Self {
        CacheKey::new(client.model_id(), &request.digest(), &client.params())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub model_id: String,
    pub prompt_digest: String,
    pub reply: String,
    /// Unix seconds at insertion.
    pub timestamp: u64,
}

/// Reply store shared by concurrent workers. Backed by an append-only JSONL
/// file when opened from a path; a later line for the same key wins.
#[derive(Debug)]
pub struct ReplyCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<CacheKey, CacheEntry>>,
    file: Mutex<Option<File>>,
    skipped_lines: usize,
}

impl ReplyCache {
    pub fn in_memory() -> Self {
        ReplyCache {
            path: None,
            entries: RwLock::new(HashMap::new()),
            file: Mutex::new(None),
            skipped_lines: 0,
        }
    }

    /// Loads `path` if it exists and opens it for appending. Lines that do
    /// not parse (for example a torn final write) are skipped and counted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |source| CacheError::Io {
            path: path.clone(),
            source,
        };
        let mut entries = HashMap::new();
        let mut skipped_lines = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for line in reader.lines() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheEntry>(&line) {
                    Ok(entry) => {
                        entries.insert(entry.key.clone(), entry);
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
        } else if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err)?;
        Ok(ReplyCache {
            path: Some(path),
            entries: RwLock::new(entries),
            file: Mutex::new(Some(file)),
            skipped_lines,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        self.entries.read().unwrap().get(key).map(|e| e.reply.clone())
    }

    pub fn entry(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.entries.read().unwrap().get(key).cloned()
    }

    /// Records a reply, appending it to the backing file when there is one.
    pub fn put(&self, key: CacheKey, model_id: &str, prompt_digest: &str, reply: &str) -> Result<(), CacheError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let entry = CacheEntry {
            key: key.clone(),
            model_id: model_id.to_string(),
            prompt_digest: prompt_digest.to_string(),
            reply: reply.to_string(),
            timestamp,
        };
        {
            let mut guard = self.file.lock().unwrap();
            if let Some(file) = guard.as_mut() {
                let mut line = serde_json::to_string(&entry).expect("cache entry serializes");
                line.push('\n');
                file.write_all(line.as_bytes()).map_err(|source| CacheError::Io {
                    path: self.path.clone().unwrap_or_default(),
                    source,
                })?;
            }
            self.entries.write().unwrap().insert(key, entry);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn persists_and_reloads_last_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/cache.jsonl");
        let key = CacheKey::new("m", "d", &DecodingParams::default());
        {
            let cache = ReplyCache::open(&path).unwrap();
            cache.put(key.clone(), "m", "d", "first").unwrap();
            cache.put(key.clone(), "m", "d", "second").unwrap();
            assert_eq!(cache.get(&key).as_deref(), Some("second"));
        }
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"key\": torn");
        fs::write(&path, text).unwrap();
        let cache = ReplyCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.skipped_lines(), 1);
        assert_eq!(cache.get(&key).as_deref(), Some("second"));
        let entry = cache.entry(&key).unwrap();
        assert_eq!(entry.model_id, "m");
        assert_eq!(entry.prompt_digest, "d");
    }

    #[test]
    fn jsonl_line_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let cache = ReplyCache::open(&path).unwrap();
        cache
            .put(CacheKey::new("m", "d", &DecodingParams::default()), "m", "d", "r")
            .unwrap();
        let line = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        keys.sort();
        assert_eq!(keys, ["key", "model_id", "prompt_digest", "reply", "timestamp"]);
    }

    #[test]
    fn concurrent_puts() {
        let cache = ReplyCache::in_memory();
        let p = DecodingParams::default();
        std::thread::scope(|s| {
            for t in 0..8 {
                let cache = &cache;
                s.spawn(move || {
                    for i in 0..50 {
                        let d = format!("{}", i % 10);
                        cache.put(CacheKey::new("m", &d, &p), "m", &d, &format!("{t}")).unwrap();
                    }
                });
            }
        });
        assert_eq!(cache.len(), 10);
    }

    proptest! {
        #[test]
        fn key_equality_iff_inputs_equal(
            m1 in "[a-c]{1,2}", m2 in "[a-c]{1,2}",
            u1 in "[xy]{0,3}", u2 in "[xy]{0,3}",
            t1 in 0u8..2, t2 in 0u8..2,
            n1 in 1u32..3, n2 in 1u32..3,
        ) {
            let p1 = DecodingParams { temperature: t1 as f64 / 2.0, max_tokens: n1 };
            let p2 = DecodingParams { temperature: t2 as f64 / 2.0, max_tokens: n2 };
            let k1 = CacheKey::new(&m1, &ChatRequest::user(u1.clone()).digest(), &p1);
            let k2 = CacheKey::new(&m2, &ChatRequest::user(u2.clone()).digest(), &p2);
            let same = m1 == m2 && u1 == u2 && p1 == p2;
            prop_assert_eq!(k1 == k2, same);
        }
    }
}
