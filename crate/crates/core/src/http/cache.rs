use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::transport::{HttpRequest, HttpResponse};
use crate::error::Result;
use crate::util::write_atomic;

/// One cached exchange, stored as `<dir>/<key[..2]>/<key>.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CachedEntry {
    pub request: HttpRequest,
    pub response: HttpResponse,
}

#[derive(Debug)]
pub enum CacheLookup {
    Hit(HttpResponse),
    Miss,
    Corrupt(String),
}

/// Content-addressed response store. Writers go through temp files and
/// renames, so concurrent readers never observe a half-written entry.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, req: &HttpRequest) -> CacheLookup {
        let path = self.path_for(&req.cache_key());
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return CacheLookup::Miss,
            Err(e) => return CacheLookup::Corrupt(format!("{}: {e}", path.display())),
        };
        match serde_json::from_str::<CachedEntry>(&text) {
            Ok(entry) if entry.request == *req => CacheLookup::Hit(entry.response),
            Ok(_) => CacheLookup::Corrupt(format!("{}: request does not match key", path.display())),
            Err(e) => CacheLookup::Corrupt(format!("{}: {e}", path.display())),
        }
    }

    pub fn put(&self, req: &HttpRequest, resp: &HttpResponse) -> Result<()> {
        let entry = CachedEntry { request: req.clone(), response: resp.clone() };
        let mut text = serde_json::to_string_pretty(&entry)?;
        text.push('\n');
        write_atomic(&self.path_for(&req.cache_key()), text.as_bytes())
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        let Ok(shards) = fs::read_dir(&self.dir) else { return 0 };
        shards
            .filter_map(|s| s.ok())
            .filter(|s| s.path().is_dir())
            .map(|s| {
                fs::read_dir(s.path())
                    .map(|it| {
                        it.filter_map(|e| e.ok()).filter(|e| e.path().extension().is_some_and(|x| x == "json")).count()
                    })
                    .unwrap_or(0)
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
