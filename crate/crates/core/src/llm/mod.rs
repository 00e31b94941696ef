//! Chat-completion gateway used for generation, fact extraction and
//! verification.

mod backends;
mod sentences;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{FetchMode, HttpClient, ReqwestTransport, ResponseCache, RetryPolicy};
use crate::par::{self, Mode};
use crate::qid::Qid;
use crate::sampler::SampleEntry;

pub use backends::{ChatBackend, FixtureChat, HttpChat, MockChat, MockKind};
pub use sentences::{count_sentences, split_sentences};

pub const USER_AGENT: &str = concat!("popfact/", env!("CARGO_PKG_VERSION"), " (research toolkit)");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatEndpointConfig {
    /// `http(s)://…` for a live server, `fixture:<dir>` for recorded
    /// responses, or `mock:<describe|extract|true|false|overlap>`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    /// Environment variable holding the bearer token, if any.
    pub auth_env: Option<String>,
}

impl Default for ChatEndpointConfig {
    fn default() -> Self {
        ChatEndpointConfig {
            base_url: "mock:describe".into(),
            model: "mock".into(),
            temperature: 0.0,
            max_tokens: 1024,
            timeout_secs: 120,
            retry: RetryPolicy::default(),
            auth_env: None,
        }
    }
}

impl ChatEndpointConfig {
    pub fn mock(kind: &str) -> Self {
        ChatEndpointConfig { base_url: format!("mock:{kind}"), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(Error::config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if !(1..=10).contains(&self.retry.max_attempts) {
            return Err(Error::config("retry.max_attempts must be between 1 and 10"));
        }
        if self.model.trim().is_empty() {
            return Err(Error::config("model name is empty"));
        }
        let b = &self.base_url;
        let known = b.starts_with("http://") || b.starts_with("https://") || b.starts_with("fixture:");
        if !known && !b.strip_prefix("mock:").is_some_and(|k| MockKind::parse(k).is_some()) {
            return Err(Error::config(format!("unsupported chat endpoint {b:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: "system".into(), content: content.into() }
    }
}

/// Wire body of a chat-completions request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub struct ChatClient {
    backend: Arc<dyn ChatBackend>,
    config: ChatEndpointConfig,
}

impl ChatClient {
    pub fn new(config: ChatEndpointConfig, backend: Arc<dyn ChatBackend>) -> Self {
        ChatClient { backend, config }
    }

    /// Builds the backend named by `config.base_url`. Live endpoints share
    /// the run's response cache; in replay mode they never touch the network.
    pub fn open(config: &ChatEndpointConfig, cache: Option<&Path>, mode: FetchMode) -> Result<Self> {
        config.validate()?;
        let b = config.base_url.as_str();
        let backend: Arc<dyn ChatBackend> = if let Some(kind) = b.strip_prefix("mock:") {
            Arc::new(MockChat::new(MockKind::parse(kind).expect("validated")))
        } else if let Some(dir) = b.strip_prefix("fixture:") {
            Arc::new(FixtureChat::new(dir))
        } else {
            let client = match (mode, cache) {
                (FetchMode::Replay, Some(dir)) => HttpClient::replay(ResponseCache::new(dir)),
                (FetchMode::Replay, None) => return Err(Error::config("replay mode needs a cache directory")),
                (FetchMode::Live, _) => {
                    let t = ReqwestTransport::new(USER_AGENT, Duration::from_secs(config.timeout_secs))?;
                    let c = HttpClient::new(Arc::new(t)).with_retry(config.retry.clone());
                    match cache {
                        Some(dir) => c.with_cache(ResponseCache::new(dir)),
                        None => c,
                    }
                }
            };
            Arc::new(HttpChat::new(Arc::new(client), config))
        };
        Ok(ChatClient::new(config.clone(), backend))
    }

    pub fn config(&self) -> &ChatEndpointConfig {
        &self.config
    }

    pub fn request(&self, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        }
    }

    pub fn chat(&self, messages: Vec<ChatMessage>) -> Result<String> {
        let req = self.request(messages);
        let content = self.backend.complete(&req)?;
        if content.trim().is_empty() {
            return Err(Error::Protocol(format!("empty completion from {}", self.config.base_url)));
        }
        Ok(content)
    }
}

/// Per-language prompt templates with a `{title}` placeholder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PromptTemplates(pub BTreeMap<String, String>);

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates(
            [("en", "Tell me about the {title}."), ("zh", "请介绍一下{title}。")]
                .into_iter()
                .map(|(l, t)| (l.to_string(), t.to_string()))
                .collect(),
        )
    }
}

impl PromptTemplates {
    pub fn render(&self, lang: &str, title: &str) -> Result<(String, String)> {
        let template =
            self.0.get(lang).ok_or_else(|| Error::config(format!("no prompt template for language {lang:?}")))?;
        Ok((template.clone(), template.replace("{title}", title)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub qid: Qid,
    pub language: String,
    pub template: String,
    pub prompt: String,
    pub response: String,
    pub model: String,
    pub sentence_count: usize,
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GenerationOutcome {
    Generated(GenerationRecord),
    Skipped { qid: Qid, language: String, reason: String },
}

/// Prompts the model about one entity using its (disambiguated) title.
pub fn generate_description(
    client: &ChatClient,
    entry: &SampleEntry,
    lang: &str,
    templates: &PromptTemplates,
    timestamp: &str,
) -> Result<GenerationOutcome> {
    let Some(title) = entry.titles.get(lang) else {
        return Ok(GenerationOutcome::Skipped {
            qid: entry.qid,
            language: lang.to_string(),
            reason: format!("no {lang} Wikipedia page"),
        });
    };
    let (template, prompt) = templates.render(lang, title)?;
    let response = client.chat(vec![ChatMessage::user(prompt.clone())])?;
    Ok(GenerationOutcome::Generated(GenerationRecord {
        qid: entry.qid,
        language: lang.to_string(),
        template,
        prompt,
        sentence_count: count_sentences(&response, lang),
        response,
        model: client.config().model.clone(),
        timestamp: timestamp.to_string(),
    }))
}

/// Generations for every (entry, language) pair, ordered by sample position
/// then language. Endpoint failures skip the pair with the error recorded.
pub fn generate_all(
    client: &ChatClient,
    entries: &[SampleEntry],
    languages: &[String],
    templates: &PromptTemplates,
    timestamp: &str,
    mode: Mode,
    threads: usize,
) -> Result<Vec<GenerationOutcome>> {
    let jobs: Vec<(&SampleEntry, &String)> =
        entries.iter().flat_map(|e| languages.iter().map(move |l| (e, l))).collect();
    let results = par::bounded(mode, threads, || {
        par::map(mode, &jobs, |(e, l)| generate_description(client, e, l, templates, timestamp))
    });
    let mut out = Vec::with_capacity(results.len());
    for ((e, l), r) in jobs.iter().zip(results) {
        match r {
            Ok(o) => out.push(o),
            Err(err @ (Error::Config(_) | Error::ReplayMiss(_))) => return Err(err),
            Err(err) => {
                log::warn!("{} [{l}]: generation failed: {err}", e.qid);
                out.push(GenerationOutcome::Skipped { qid: e.qid, language: l.to_string(), reason: err.to_string() });
            }
        }
    }
    Ok(out)
}

/// Average response length and fact count for one (model, language) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub model: String,
    pub language: String,
    pub responses: usize,
    pub avg_sentences: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_facts: Option<f64>,
}

pub fn generation_stats(
    records: &[GenerationRecord],
    facts: Option<&BTreeMap<(Qid, String), usize>>,
) -> Vec<GenerationStats> {
    let mut groups: BTreeMap<(String, String), Vec<&GenerationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.model.clone(), r.language.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, language), rs)| {
            let n = rs.len() as f64;
            let avg_sentences = rs.iter().map(|r| r.sentence_count as f64).sum::<f64>() / n;
            let avg_facts = facts.map(|f| {
                rs.iter().map(|r| f.get(&(r.qid, r.language.clone())).copied().unwrap_or(0) as f64).sum::<f64>() / n
            });
            GenerationStats { model, language, responses: rs.len(), avg_sentences, avg_facts }
        })
        .collect()
}
