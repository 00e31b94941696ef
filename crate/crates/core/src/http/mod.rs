//! Cached, rate-limited HTTP access.
//!
//! Every response that reaches the pipeline is stored in a content-addressed
//! [`ResponseCache`]. In [`FetchMode::Replay`] the network is never touched
//! and a cache miss is a hard error.

mod cache;
mod client;
mod limiter;
mod transport;

pub use cache::{CacheLookup, CachedEntry, ResponseCache};
pub use client::{FetchMode, HttpClient, RetryPolicy};
pub use limiter::RateLimiter;
pub use transport::{HttpRequest, HttpResponse, Method, ReqwestTransport, Transport, TransportFailure};
