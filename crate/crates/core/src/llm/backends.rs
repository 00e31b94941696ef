use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{ChatEndpointConfig, ChatRequest};
use crate::error::{Error, Result};
use crate::http::{HttpClient, HttpRequest};
use crate::sim::text;
use crate::util::{canonical_json, sha256_hex};

pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<String>;
}

/// Any server speaking the common chat-completions JSON schema. Requests go
/// through the shared [`HttpClient`], so they are cached and replayable.
pub struct HttpChat {
    client: Arc<HttpClient>,
    url: String,
    auth_env: Option<String>,
    retry: crate::http::RetryPolicy,
}

impl HttpChat {
    pub fn new(client: Arc<HttpClient>, cfg: &ChatEndpointConfig) -> Self {
        let base = cfg.base_url.trim_end_matches('/');
        let url =
            if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        HttpChat { client, url, auth_env: cfg.auth_env.clone(), retry: cfg.retry.clone() }
    }
}

pub(crate) fn first_choice(body: &str, url: &str) -> Result<String> {
    let v: Value = serde_json::from_str(body).map_err(|e| Error::Protocol(format!("invalid JSON from {url}: {e}")))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Protocol(format!("{url}: response has no choices[0].message.content")))
}

impl ChatBackend for HttpChat {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let mut http = HttpRequest::post_json(&self.url, &serde_json::to_value(req)?);
        if let Some(var) = &self.auth_env {
            if let Ok(token) = std::env::var(var) {
                http = http.with_header("Authorization", &format!("Bearer {token}"));
            }
        }
        let resp = self.client.fetch_with(&http, &self.retry)?;
        if !resp.is_success() {
            return Err(Error::Endpoint { url: self.url.clone(), status: resp.status, body: resp.body });
        }
        first_choice(&resp.body, &self.url)
    }
}

/// Recorded responses keyed by the SHA-256 of the canonical request JSON,
/// one `<key>.json` file per request holding `{"request": .., "content": ..}`.
pub struct FixtureChat {
    dir: PathBuf,
}

impl FixtureChat {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FixtureChat { dir: dir.into() }
    }

    pub fn key(req: &ChatRequest) -> Result<String> {
        Ok(sha256_hex(canonical_json(req)?))
    }

    pub fn record(&self, req: &ChatRequest, content: &str) -> Result<()> {
        let path = self.dir.join(format!("{}.json", Self::key(req)?));
        crate::util::write_json_pretty(&path, &json!({"request": req, "content": content}))
    }
}

impl ChatBackend for FixtureChat {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let key = Self::key(req)?;
        let path = self.dir.join(format!("{key}.json"));
        let text = std::fs::read_to_string(&path)
            .map_err(|_| Error::ReplayMiss(format!("no chat fixture {key} in {}", self.dir.display())))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("corrupt chat fixture {}: {e}", path.display())))?;
        v.get("content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Protocol(format!("chat fixture {} has no content", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MockKind {
    /// Short synthetic encyclopedia-style description of the prompt's subject.
    Describe,
    /// Echoes the sentence after a `Sentence:` marker as a one-item list.
    Extract,
    True,
    False,
    /// Judges by token overlap between the fact and the evidence.
    Overlap,
}

impl MockKind {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "describe" => MockKind::Describe,
            "extract" => MockKind::Extract,
            "true" => MockKind::True,
            "false" => MockKind::False,
            "overlap" => MockKind::Overlap,
            _ => return None,
        })
    }
}

pub struct MockChat {
    kind: MockKind,
}

impl MockChat {
    pub fn new(kind: MockKind) -> Self {
        MockChat { kind }
    }
}

fn last_user(req: &ChatRequest) -> &str {
    req.messages.iter().rev().find(|m| m.role == "user").map_or("", |m| m.content.as_str())
}

/// Subject of a "Tell me about X." style prompt.
fn subject(prompt: &str) -> String {
    let p = prompt.trim();
    for marker in ["about the ", "about ", "介绍一下", "介绍"] {
        if let Some(k) = p.find(marker) {
            let rest = &p[k + marker.len()..];
            return rest.trim_end_matches(['.', '?', '!', '。', '？', '！']).trim().to_string();
        }
    }
    p.to_string()
}

fn describe(prompt: &str) -> String {
    let topic = subject(prompt);
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from_str_radix(&sha256_hex(prompt)[..16], 16).unwrap_or(0));
    let km = (rng.random_range(10f64.ln()..3000f64.ln())).exp();
    let zh = topic.chars().any(crate::factuality::is_cjk);
    if zh {
        let mut out = format!("{topic}是一条河流，全长约{}公里。", text::km_text(km));
        for _ in 0..rng.random_range(3..8) {
            out.push_str(&text::zh_filler_sentence(&mut rng, &topic));
        }
        return out;
    }
    let mut sentences = vec![
        format!("The {topic} is a river of regional importance."),
        format!("It stretches for approximately {} km through varied terrain.", text::km_text(km)),
    ];
    for _ in 0..rng.random_range(3..9) {
        sentences.push(text::filler_sentence(&mut rng, &topic, "main stem"));
    }
    sentences.join(" ")
}

fn extract(prompt: &str) -> String {
    let Some(k) = prompt.rfind("Sentence:").or_else(|| prompt.rfind("Sentences:")) else {
        return String::new();
    };
    let rest = &prompt[k..];
    let body = rest.split_once(':').map_or("", |(_, b)| b);
    let body = body.split("\n\n").next().unwrap_or("").trim();
    if body.is_empty() {
        return String::new();
    }
    super::split_sentences(body, "en").iter().map(|s| format!("- {s}")).collect::<Vec<_>>().join("\n")
}

fn overlap_tokens(s: &str) -> Vec<String> {
    crate::factuality::tokenize(s)
        .into_iter()
        .filter(|t| t.chars().count() > 2 || crate::factuality::is_cjk_token(t))
        .collect()
}

fn overlap(prompt: &str) -> String {
    let Some(k) = prompt.rfind("Input:") else {
        return "I cannot determine that.".into();
    };
    // The instruction line names the topic; only the context counts as evidence.
    let evidence = prompt[..k].split_once("\n\n").map_or(&prompt[..k], |(_, rest)| rest);
    let fact = prompt[k + 6..].split("True or False?").next().unwrap_or("");
    let fact_tokens = overlap_tokens(fact);
    if fact_tokens.is_empty() {
        return "I cannot determine that.".into();
    }
    let ev: std::collections::BTreeSet<String> = overlap_tokens(evidence).into_iter().collect();
    let hits = fact_tokens.iter().filter(|t| ev.contains(*t)).count();
    if hits * 10 >= fact_tokens.len() * 7 { "True" } else { "False" }.to_string()
}

impl ChatBackend for MockChat {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let prompt = last_user(req);
        Ok(match self.kind {
            MockKind::Describe => describe(prompt),
            MockKind::Extract => extract(prompt),
            MockKind::True => "True".into(),
            MockKind::False => "False".into(),
            MockKind::Overlap => overlap(prompt),
        })
    }
}
