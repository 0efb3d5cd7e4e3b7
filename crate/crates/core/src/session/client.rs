use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::util::sha256_hex;
use crate::{Error, Result};

/// Vendor-neutral chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub system: String,
    pub user: String,
    pub temperature: f64,
}

impl ChatRequest {
    /// Content address of the full rendered request.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("request serializes").as_bytes())
    }
}

pub trait ChatClient: Send + Sync {
    fn model_id(&self) -> &str;
    fn complete(&self, request: &ChatRequest) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub request_hash: String,
    pub model: String,
    pub raw_response: String,
    #[serde(default)]
    pub parsed: Option<serde_json::Value>,
    pub timestamp: String,
}

/// Directory of JSON files, one per request hash.
#[derive(Debug)]
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)
            .map_err(|e| Error::io(format!("creating cache dir {}", dir.display()), e))?;
        Ok(ResponseCache {
            dir,
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn get(&self, hash: &str) -> Result<Option<CacheRecord>> {
        let path = self.path(hash);
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(format!("reading {}", path.display()), e)),
        }
    }

    pub fn put(&self, record: &CacheRecord) -> Result<()> {
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let path = self.path(&record.request_hash);
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(record)?)
            .map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn len(&self) -> Result<usize> {
        let entries = fs::read_dir(&self.dir)
            .map_err(|e| Error::io(format!("listing {}", self.dir.display()), e))?;
        Ok(entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .count())
    }

    pub fn is_empty(&self) -> Result<bool> {
        self.len().map(|n| n == 0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub hits: usize,
    pub calls: usize,
}

impl CacheStats {
    pub fn lookups(&self) -> usize {
        self.hits + self.calls
    }

    pub fn hit_rate(&self) -> f64 {
        if self.lookups() == 0 {
            1.0
        } else {
            self.hits as f64 / self.lookups() as f64
        }
    }
}

/// A chat client behind a content-addressed cache. With `offline` set, or
/// without an underlying client, a miss is an error.
pub struct CachedClient<'a> {
    model: String,
    client: Option<&'a dyn ChatClient>,
    cache: Option<&'a ResponseCache>,
    offline: bool,
    hits: AtomicUsize,
    calls: AtomicUsize,
}

impl<'a> CachedClient<'a> {
    pub fn new(client: &'a dyn ChatClient, cache: Option<&'a ResponseCache>) -> Self {
        CachedClient {
            model: client.model_id().to_string(),
            client: Some(client),
            cache,
            offline: false,
            hits: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    /// Cache-only access for a given model id.
    pub fn offline(model: impl Into<String>, cache: &'a ResponseCache) -> Self {
        CachedClient {
            model: model.into(),
            client: None,
            cache: Some(cache),
            offline: true,
            hits: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            calls: self.calls.load(Ordering::Relaxed),
        }
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<String> {
        let hash = request.hash();
        if let Some(cache) = self.cache {
            if let Some(record) = cache.get(&hash)? {
                self.hits.fetch_add(1, Ordering::Relaxed);
                return Ok(record.raw_response);
            }
        }
        let client = match (self.client, self.offline) {
            (Some(c), false) => c,
            _ => {
                return Err(Error::Offline(format!(
                    "no cached response for request {}",
                    &hash[..12]
                )))
            }
        };
        self.calls.fetch_add(1, Ordering::Relaxed);
        let raw = client.complete(request)?;
        if let Some(cache) = self.cache {
            cache.put(&CacheRecord {
                request_hash: hash,
                model: request.model.clone(),
                raw_response: raw.clone(),
                parsed: None,
                timestamp: now_stamp(),
            })?;
        }
        Ok(raw)
    }

    /// Attach the parsed interpretation to a cached response.
    pub fn record_parsed(&self, request: &ChatRequest, parsed: serde_json::Value) -> Result<()> {
        let Some(cache) = self.cache else {
            return Ok(());
        };
        let hash = request.hash();
        if let Some(mut record) = cache.get(&hash)? {
            if record.parsed.as_ref() != Some(&parsed) {
                record.parsed = Some(parsed);
                cache.put(&record)?;
            }
        }
        Ok(())
    }
}

fn now_stamp() -> String {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Echo(AtomicUsize);

    impl ChatClient for Echo {
        fn model_id(&self) -> &str {
            "echo"
        }
        fn complete(&self, r: &ChatRequest) -> Result<String> {
            self.0.fetch_add(1, Ordering::Relaxed);
            Ok(r.user.clone())
        }
    }

    fn req(user: &str) -> ChatRequest {
        ChatRequest {
            model: "echo".into(),
            system: "s".into(),
            user: user.into(),
            temperature: 0.0,
        }
    }

    #[test]
    fn second_lookup_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let echo = Echo(AtomicUsize::new(0));
        let client = CachedClient::new(&echo, Some(&cache));
        assert_eq!(client.complete(&req("a")).unwrap(), "a");
        assert_eq!(client.complete(&req("a")).unwrap(), "a");
        assert_eq!(echo.0.load(Ordering::Relaxed), 1);
        assert_eq!(client.stats(), CacheStats { hits: 1, calls: 1 });
        assert_eq!(cache.len().unwrap(), 1);
    }

    #[test]
    fn offline_miss_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let client = CachedClient::offline("echo", &cache);
        assert!(matches!(client.complete(&req("a")), Err(Error::Offline(_))));
    }

    #[test]
    fn hash_changes_with_any_field() {
        let base = req("a");
        let mut other = base.clone();
        other.model = "other".into();
        assert_ne!(base.hash(), other.hash());
        assert_ne!(base.hash(), req("b").hash());
    }

    #[test]
    fn parsed_value_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path()).unwrap();
        let echo = Echo(AtomicUsize::new(0));
        let client = CachedClient::new(&echo, Some(&cache));
        let r = req("Physical");
        client.complete(&r).unwrap();
        client.record_parsed(&r, serde_json::json!(["Physical"])).unwrap();
        let rec = cache.get(&r.hash()).unwrap().unwrap();
        assert_eq!(rec.parsed, Some(serde_json::json!(["Physical"])));
    }
}
