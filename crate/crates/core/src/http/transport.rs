use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::util::{canonical_json, query_string, sha256_hex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

/// A request as the cache sees it. Headers are sent but never part of the
/// cache key, so auth tokens stay out of the key and out of the cache files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: Method,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_type: Option<String>,
    #[serde(skip)]
    pub headers: Vec<(String, String)>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        HttpRequest { method: Method::Get, url: url.into(), body: None, content_type: None, headers: Vec::new() }
    }

    pub fn get_query(base: &str, params: &[(&str, &str)]) -> Self {
        Self::get(format!("{base}?{}", query_string(params)))
    }

    pub fn post_form(url: impl Into<String>, params: &[(&str, &str)]) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            body: Some(query_string(params)),
            content_type: Some("application/x-www-form-urlencoded".into()),
            headers: Vec::new(),
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        HttpRequest {
            method: Method::Post,
            url: url.into(),
            body: Some(canonical_json(body).unwrap_or_default()),
            content_type: Some("application/json".into()),
            headers: Vec::new(),
        }
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Self {
        self.headers.push((name.to_string(), value.to_string()));
        self
    }

    /// SHA-256 over the canonicalised method, URL and body.
    pub fn cache_key(&self) -> String {
        sha256_hex(canonical_json(self).unwrap_or_default())
    }

    pub fn describe(&self) -> String {
        match &self.body {
            Some(b) if b.len() > 120 => {
                format!("{:?} {} [{}…]", self.method, self.url, &b[..b.floor_char_boundary(120)])
            }
            Some(b) => format!("{:?} {} [{b}]", self.method, self.url),
            None => format!("{:?} {}", self.method, self.url),
        }
    }

    pub fn host(&self) -> String {
        url::Url::parse(&self.url).ok().and_then(|u| u.host_str().map(str::to_string)).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn ok(body: impl Into<String>) -> Self {
        HttpResponse { status: 200, body: body.into() }
    }

    pub fn status(status: u16, body: impl Into<String>) -> Self {
        HttpResponse { status, body: body.into() }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout,
    Connection(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportFailure>;
}

/// Live transport over blocking reqwest.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(user_agent: &str, timeout: Duration) -> crate::Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(timeout)
            .build()
            .map_err(|e| crate::Error::config(format!("cannot build HTTP client: {e}")))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportFailure> {
        let mut builder = match req.method {
            Method::Get => self.client.get(&req.url),
            Method::Post => self.client.post(&req.url),
        };
        if let Some(ct) = &req.content_type {
            builder = builder.header("Content-Type", ct);
        }
        if req.url.contains("sparql") {
            builder = builder.header("Accept", "application/sparql-results+json");
        }
        for (k, v) in &req.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &req.body {
            builder = builder.body(body.clone());
        }
        let resp = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportFailure::Timeout
            } else {
                TransportFailure::Connection(e.to_string())
            }
        })?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| {
            if e.is_timeout() {
                TransportFailure::Timeout
            } else {
                TransportFailure::Connection(e.to_string())
            }
        })?;
        Ok(HttpResponse { status, body })
    }
}
