use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::EvidenceOptions;
use crate::factuality::{EvidenceConfig, FactPrompts, JudgeOptions};
use crate::ingest::{ClassSpec, IngestEndpoints, DEFAULT_PAGE_SIZE};
use crate::llm::{ChatEndpointConfig, PromptTemplates};
use crate::popularity::CorrelationMethod;
use crate::probes::DEFAULT_STRIDE;
use crate::sampler::SamplingPlan;
use crate::sim::SimConfig;
use crate::util::hash_json;
use crate::wikistats::{PageviewWindow, WikiEndpoints};

/// Where Wikimedia data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Live {
        #[serde(default)]
        ingest: IngestEndpoints,
        #[serde(default)]
        wiki: WikiEndpoints,
        /// Minimum gap between requests to one host.
        #[serde(default = "default_rate_limit")]
        rate_limit_ms: u64,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
    /// The generated offline world; one per class.
    Sim(SimConfig),
}

fn default_rate_limit() -> u64 {
    100
}

fn default_timeout() -> u64 {
    60
}

impl Default for Source {
    fn default() -> Self {
        Source::Live {
            ingest: IngestEndpoints::default(),
            wiki: WikiEndpoints::default(),
            rate_limit_ms: default_rate_limit(),
            timeout_secs: default_timeout(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub length_language: String,
    pub heaps_stride: usize,
    /// `qid,length_km` overrides for known-bad Wikidata lengths.
    pub corrections: Option<PathBuf>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { length_language: "en".into(), heaps_stride: DEFAULT_STRIDE, corrections: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub classes: Vec<ClassSpec>,
    pub languages: Vec<String>,
    pub source: Source,
    pub window: PageviewWindow,
    pub plan: SamplingPlan,
    /// Date stamped on collected evidence and generations. Fixed in config so
    /// reruns reproduce their outputs byte for byte.
    pub snapshot: String,
    pub correlation: CorrelationMethod,
    pub evidence: EvidenceOptions,
    pub generators: Vec<ChatEndpointConfig>,
    pub extractor: ChatEndpointConfig,
    pub judge: ChatEndpointConfig,
    pub prompts: PromptTemplates,
    pub fact_prompts: FactPrompts,
    pub judging: JudgeOptions,
    pub evidence_configs: Vec<EvidenceConfig>,
    pub probes: ProbeConfig,
    /// Optional region table replacing the shipped one.
    pub regions: Option<PathBuf>,
    pub page_size: usize,
    pub threads: usize,
    pub parallel: bool,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            classes: vec![ClassSpec::rivers()],
            languages: vec!["en".into(), "zh".into()],
            source: Source::default(),
            window: PageviewWindow::default(),
            plan: SamplingPlan::default(),
            snapshot: "2024-12-31".into(),
            correlation: CorrelationMethod::default(),
            evidence: EvidenceOptions::default(),
            generators: vec![ChatEndpointConfig::mock("describe")],
            extractor: ChatEndpointConfig::mock("extract"),
            judge: ChatEndpointConfig::mock("overlap"),
            prompts: PromptTemplates::default(),
            fact_prompts: FactPrompts::default(),
            judging: JudgeOptions::default(),
            evidence_configs: EvidenceConfig::ALL.to_vec(),
            probes: ProbeConfig::default(),
            regions: None,
            page_size: DEFAULT_PAGE_SIZE,
            threads: 8,
            parallel: true,
            cache_dir: PathBuf::from(".popfact-cache"),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // relative paths in a config file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.cache_dir, &mut cfg.out_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        for p in [cfg.probes.corrections.as_mut(), cfg.regions.as_mut()].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config(format!("cannot serialise config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("no classes configured"));
        }
        let mut names: Vec<&str> = self.classes.iter().map(|c| c.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("class names must be unique"));
        }
        for c in &self.classes {
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_') {
                return Err(Error::config(format!("class name {:?} must be [A-Za-z0-9_-]+", c.name)));
            }
            if c.name == "report" {
                return Err(Error::config("`report` is reserved for the cross-class report directory"));
            }
        }
        if self.languages.is_empty() {
            return Err(Error::config("no languages configured"));
        }
        if !self.languages.contains(&self.plan.pivot_language) {
            return Err(Error::config(format!(
                "pivot language {:?} is not among the languages",
                self.plan.pivot_language
            )));
        }
        if self.generators.is_empty() {
            return Err(Error::config("no generators configured"));
        }
        let mut models: Vec<&str> = self.generators.iter().map(|g| g.model.as_str()).collect();
        models.sort();
        if models.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("generator model names must be unique"));
        }
        for g in self.generators.iter().chain([&self.extractor, &self.judge]) {
            g.validate()?;
        }
        if self.judging.top_k == 0 {
            return Err(Error::config("judging.top_k must be at least 1"));
        }
        if self.threads == 0 || self.page_size == 0 || self.probes.heaps_stride == 0 {
            return Err(Error::config("threads, page_size and probes.heaps_stride must be positive"));
        }
        Ok(())
    }

    /// Hash of everything that determines stage outputs. Output and cache
    /// locations and thread counts are excluded.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.cache_dir = PathBuf::new();
        c.threads = 0;
        c.parallel = false;
        hash_json(&c)
    }

    pub fn class(&self, name: &str) -> Result<&ClassSpec> {
        self.classes.iter().find(|c| c.name == name).ok_or_else(|| Error::config(format!("unknown class {name:?}")))
    }
}
