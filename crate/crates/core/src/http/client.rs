use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::{CacheLookup, ResponseCache};
use super::limiter::RateLimiter;
use super::transport::{HttpRequest, HttpResponse, Transport, TransportFailure};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchMode {
    #[default]
    Live,
    /// Serve only from the cache; never touch the network.
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled after every failure.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay_ms: 500 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, failed_attempts: u32) -> Duration {
        let factor = 1u64 << failed_attempts.saturating_sub(1).min(16);
        Duration::from_millis(self.base_delay_ms.saturating_mul(factor))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || status == 408 || (500..600).contains(&status)
}

/// Shared HTTP front end: cache first, then the transport with retries and
/// per-host rate limiting. Successful responses and 404s are cached.
pub struct HttpClient {
    transport: Option<Arc<dyn Transport>>,
    cache: Option<ResponseCache>,
    mode: FetchMode,
    retry: RetryPolicy,
    limiter: RateLimiter,
    network_calls: AtomicU64,
}

impl HttpClient {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        HttpClient {
            transport: Some(transport),
            cache: None,
            mode: FetchMode::Live,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::unlimited(),
            network_calls: AtomicU64::new(0),
        }
    }

    /// A client that can only answer from `cache`.
    pub fn replay(cache: ResponseCache) -> Self {
        HttpClient {
            transport: None,
            cache: Some(cache),
            mode: FetchMode::Replay,
            retry: RetryPolicy::default(),
            limiter: RateLimiter::unlimited(),
            network_calls: AtomicU64::new(0),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_mode(mut self, mode: FetchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, interval: Duration) -> Self {
        self.limiter = RateLimiter::new(interval);
        self
    }

    pub fn mode(&self) -> FetchMode {
        self.mode
    }

    pub fn retry_policy(&self) -> &RetryPolicy {
        &self.retry
    }

    /// Requests that actually went to the transport.
    pub fn network_calls(&self) -> u64 {
        self.network_calls.load(Ordering::Relaxed)
    }

    pub fn fetch(&self, req: &HttpRequest) -> Result<HttpResponse> {
        self.fetch_with(req, &self.retry)
    }

    pub fn fetch_with(&self, req: &HttpRequest, retry: &RetryPolicy) -> Result<HttpResponse> {
        if let Some(cache) = &self.cache {
            match cache.get(req) {
                CacheLookup::Hit(resp) => return Ok(resp),
                CacheLookup::Miss if self.mode == FetchMode::Replay => {
                    return Err(Error::ReplayMiss(req.describe()));
                }
                CacheLookup::Corrupt(why) if self.mode == FetchMode::Replay => {
                    return Err(Error::ReplayMiss(format!("{} (corrupt cache entry: {why})", req.describe())));
                }
                CacheLookup::Corrupt(why) => {
                    log::warn!("refetching over corrupt cache entry: {why}");
                }
                CacheLookup::Miss => {}
            }
        } else if self.mode == FetchMode::Replay {
            return Err(Error::ReplayMiss(format!("{} (no cache configured)", req.describe())));
        }

        let transport =
            self.transport.as_ref().ok_or_else(|| Error::ReplayMiss(format!("{} (no transport)", req.describe())))?;

        let host = req.host();
        let mut attempts = Vec::new();
        let max_attempts = retry.max_attempts.max(1);
        let mut timed_out = false;
        for attempt in 1..=max_attempts {
            self.limiter.wait(&host);
            self.network_calls.fetch_add(1, Ordering::Relaxed);
            match transport.send(req) {
                Ok(resp) if resp.is_success() || resp.status == 404 => {
                    if let Some(cache) = &self.cache {
                        cache.put(req, &resp)?;
                    }
                    return Ok(resp);
                }
                Ok(resp) if retryable(resp.status) => {
                    attempts.push(format!("attempt {attempt}: HTTP {}", resp.status));
                }
                Ok(resp) => {
                    return Err(Error::Endpoint {
                        url: req.url.clone(),
                        status: resp.status,
                        body: truncate(&resp.body, 300),
                    });
                }
                Err(TransportFailure::Timeout) => {
                    timed_out = true;
                    attempts.push(format!("attempt {attempt}: timeout"));
                }
                Err(TransportFailure::Connection(msg)) => {
                    attempts.push(format!("attempt {attempt}: {msg}"));
                }
            }
            if attempt < max_attempts {
                std::thread::sleep(retry.delay(attempt));
            }
        }
        if timed_out && attempts.iter().all(|a| a.ends_with("timeout")) {
            return Err(Error::Timeout { url: req.url.clone() });
        }
        Err(Error::Transport {
            url: req.url.clone(),
            message: format!("gave up after {max_attempts} attempts"),
            attempts,
        })
    }

    /// Fetches and parses a JSON body. A 404 becomes [`Error::NotFound`].
    pub fn fetch_json(&self, req: &HttpRequest) -> Result<serde_json::Value> {
        let resp = self.fetch(req)?;
        if resp.status == 404 {
            return Err(Error::NotFound(req.url.clone()));
        }
        serde_json::from_str(&resp.body).map_err(|e| Error::Protocol(format!("invalid JSON from {}: {e}", req.url)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    if s.len() <= n {
        s.to_string()
    } else {
        format!("{}…", &s[..s.floor_char_boundary(n)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Returns the scripted statuses in order, then 200s.
    struct Scripted {
        statuses: Mutex<Vec<u16>>,
    }

    impl Transport for Scripted {
        fn send(&self, _req: &HttpRequest) -> Result<HttpResponse, TransportFailure> {
            let mut s = self.statuses.lock().unwrap();
            let status = if s.is_empty() { 200 } else { s.remove(0) };
            Ok(HttpResponse::status(status, "{\"ok\":true}"))
        }
    }

    fn fast() -> RetryPolicy {
        RetryPolicy { max_attempts: 3, base_delay_ms: 1 }
    }

    fn scripted(statuses: &[u16]) -> Arc<Scripted> {
        Arc::new(Scripted { statuses: Mutex::new(statuses.to_vec()) })
    }

    #[test]
    fn retries_then_succeeds() {
        let client = HttpClient::new(scripted(&[503, 503])).with_retry(fast());
        let resp = client.fetch(&HttpRequest::get("https://a.org/x")).unwrap();
        assert_eq!(resp.status, 200);
        assert_eq!(client.network_calls(), 3);
    }

    #[test]
    fn exhausts_retries() {
        let client = HttpClient::new(scripted(&[500, 500, 500])).with_retry(fast());
        let err = client.fetch(&HttpRequest::get("https://a.org/x")).unwrap_err();
        match err {
            Error::Transport { attempts, .. } => assert_eq!(attempts.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn client_error_is_not_retried() {
        let client = HttpClient::new(scripted(&[401])).with_retry(fast());
        let err = client.fetch(&HttpRequest::get("https://a.org/x")).unwrap_err();
        assert!(matches!(err, Error::Endpoint { status: 401, .. }));
        assert_eq!(client.network_calls(), 1);
    }

    #[test]
    fn second_fetch_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let client = HttpClient::new(scripted(&[])).with_cache(ResponseCache::new(dir.path()));
        let req = HttpRequest::get("https://a.org/x");
        client.fetch(&req).unwrap();
        client.fetch(&req).unwrap();
        assert_eq!(client.network_calls(), 1);
    }

    #[test]
    fn replay_miss_names_request() {
        let dir = tempfile::tempdir().unwrap();
        let client = HttpClient::replay(ResponseCache::new(dir.path()));
        let err = client.fetch(&HttpRequest::get("https://a.org/missing")).unwrap_err();
        match err {
            Error::ReplayMiss(what) => assert!(what.contains("https://a.org/missing")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupt_entry_refetched_live_but_fatal_in_replay() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let req = HttpRequest::get("https://a.org/c");
        let path = cache.path_for(&req.cache_key());
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, "garbage").unwrap();

        let replay = HttpClient::replay(cache.clone());
        assert!(matches!(replay.fetch(&req), Err(Error::ReplayMiss(_))));

        let live = HttpClient::new(scripted(&[])).with_cache(cache.clone());
        assert_eq!(live.fetch(&req).unwrap().status, 200);
        assert_eq!(live.network_calls(), 1);
        // repaired entry now replays
        assert!(replay.fetch(&req).is_ok());
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { max_attempts: 4, base_delay_ms: 100 };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(400));
    }
}
