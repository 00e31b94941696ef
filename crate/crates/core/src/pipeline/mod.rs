//! Stage runner: each stage reads its upstream artifacts, writes its own
//! artifacts under `<out>/<class>/<stage>/` and records a [`RunManifest`]
//! with the config hash and input/output checksums.

mod config;
mod report;
mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factuality::EvidenceConfig;
use crate::http::{FetchMode, HttpClient, ReqwestTransport, ResponseCache};
use crate::ingest::{ClassSpec, IngestEndpoints};
use crate::llm::{ChatClient, ChatEndpointConfig, USER_AGENT};
use crate::par::Mode;
use crate::sim::{self, SimConfig, SimWorld};
use crate::util::{file_sha256, read_json, write_json_pretty};
use crate::wikistats::WikiEndpoints;

pub use config::{ProbeConfig, RunConfig, Source};
pub use report::report;
pub use stages::{
    evaluate, evidence, generate, ingest, probe_lengths, probe_lex, sample, stats, tier, FactRecord, VerdictRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Stats,
    Tier,
    Sample,
    Evidence,
    Generate,
    Evaluate,
    ProbeLengths,
    ProbeLex,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Stats,
        Stage::Tier,
        Stage::Sample,
        Stage::Evidence,
        Stage::Generate,
        Stage::Evaluate,
        Stage::ProbeLengths,
        Stage::ProbeLex,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Tier => "tier",
            Stage::Sample => "sample",
            Stage::Evidence => "evidence",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::ProbeLengths => "probe-lengths",
            Stage::ProbeLex => "probe-lex",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| Error::config(format!("unknown stage {s:?}")))
    }
}

/// Provenance record written next to every stage's artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: Stage,
    pub class: Option<String>,
    pub config_hash: String,
    pub seed: u64,
    /// Paths relative to the output directory, mapped to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Left out of offline runs, whose manifests must be reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u64>,
    pub warnings: Vec<String>,
}

/// Process exit status for an error: 2 configuration, 3 missing upstream
/// artifact, 4 transport, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Validation(_) => 2,
        Error::Dependency { .. } => 3,
        e if e.is_transport() => 4,
        _ => 1,
    }
}

/// Run-time selections that narrow a run without changing its config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub classes: Option<Vec<String>>,
    pub languages: Option<Vec<String>>,
    pub evidence: Option<Vec<EvidenceConfig>>,
}

pub struct Context {
    pub config: RunConfig,
    pub config_hash: String,
    pub out: PathBuf,
    pub fetch: FetchMode,
    pub force: bool,
    pub selection: Selection,
    /// Deterministic runs (offline world or replay) omit wall time.
    pub deterministic: bool,
    sims: BTreeMap<String, Arc<SimWorld>>,
}

impl Context {
    pub fn new(config: RunConfig, fetch: FetchMode, force: bool, selection: Selection) -> Result<Self> {
        config.validate()?;
        for name in selection.classes.iter().flatten() {
            config.class(name)?;
        }
        for lang in selection.languages.iter().flatten() {
            if !config.languages.contains(lang) {
                return Err(Error::config(format!("language {lang:?} is not configured")));
            }
        }
        let deterministic = fetch == FetchMode::Replay || matches!(config.source, Source::Sim(_));
        Ok(Context {
            config_hash: config.hash()?,
            out: config.out_dir.clone(),
            fetch,
            force,
            selection,
            deterministic,
            sims: BTreeMap::new(),
            config,
        })
    }

    pub fn mode(&self) -> Mode {
        if self.config.parallel {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }

    pub fn threads(&self) -> usize {
        self.config.threads
    }

    pub fn classes(&self) -> Vec<&ClassSpec> {
        self.config
            .classes
            .iter()
            .filter(|c| self.selection.classes.as_ref().is_none_or(|s| s.contains(&c.name)))
            .collect()
    }

    pub fn languages(&self) -> Vec<String> {
        self.config
            .languages
            .iter()
            .filter(|l| self.selection.languages.as_ref().is_none_or(|s| s.contains(l)))
            .cloned()
            .collect()
    }

    pub fn evidence_configs(&self) -> Vec<EvidenceConfig> {
        self.config
            .evidence_configs
            .iter()
            .copied()
            .filter(|c| self.selection.evidence.as_ref().is_none_or(|s| s.contains(c)))
            .collect()
    }

    pub fn stage_dir(&self, class: Option<&str>, stage: Stage) -> PathBuf {
        match class {
            Some(c) => self.out.join(c).join(stage.as_str()),
            None => self.out.join(stage.as_str()),
        }
    }

    fn sim_world(&mut self, class: &ClassSpec, base: &SimConfig) -> Arc<SimWorld> {
        let idx = self.config.classes.iter().position(|c| c.name == class.name).unwrap_or(0) as u64;
        self.sims
            .entry(class.name.clone())
            .or_insert_with(|| {
                let cfg =
                    SimConfig { seed: base.seed.wrapping_add(idx), class_qid: class.class_qid.clone(), ..base.clone() };
                Arc::new(SimWorld::generate(cfg))
            })
            .clone()
    }

    /// HTTP client for one class's Wikimedia traffic, with its own cache.
    pub fn http(&mut self, class: &ClassSpec) -> Result<HttpClient> {
        let cache = ResponseCache::new(self.config.cache_dir.join("wikimedia").join(&class.name));
        if self.fetch == FetchMode::Replay {
            return Ok(HttpClient::replay(cache));
        }
        Ok(match self.config.source.clone() {
            Source::Sim(base) => HttpClient::new(self.sim_world(class, &base)).with_cache(cache),
            Source::Live { rate_limit_ms, timeout_secs, .. } => {
                let t = ReqwestTransport::new(USER_AGENT, Duration::from_secs(timeout_secs))?;
                HttpClient::new(Arc::new(t)).with_cache(cache).with_rate_limit(Duration::from_millis(rate_limit_ms))
            }
        })
    }

    pub fn ingest_endpoints(&self) -> IngestEndpoints {
        match &self.config.source {
            Source::Sim(_) => sim::ingest_endpoints(),
            Source::Live { ingest, .. } => ingest.clone(),
        }
    }

    pub fn wiki_endpoints(&self) -> WikiEndpoints {
        match &self.config.source {
            Source::Sim(_) => sim::wiki_endpoints(),
            Source::Live { wiki, .. } => wiki.clone(),
        }
    }

    pub fn chat(&self, cfg: &ChatEndpointConfig) -> Result<ChatClient> {
        ChatClient::open(cfg, Some(&self.config.cache_dir.join("llm")), self.fetch)
    }

    fn manifest_path(&self, class: Option<&str>, stage: Stage) -> PathBuf {
        self.stage_dir(class, stage).join("manifest.json")
    }

    /// Manifest of an upstream stage; errors when it is missing or was
    /// produced under another config (unless forced).
    pub fn require(&self, class: Option<&str>, stage: Stage) -> Result<RunManifest> {
        let path = self.manifest_path(class, stage);
        if !path.exists() {
            return Err(Error::Dependency { stage: stage.to_string(), path });
        }
        let m: RunManifest =
            read_json(&path).map_err(|e| Error::Load(format!("unreadable manifest {}: {e}", path.display())))?;
        if m.config_hash != self.config_hash && !self.force {
            return Err(Error::config(format!(
                "`{stage}` output at {} was produced with config {}, current config is {}; rerun `{stage}` or pass --force",
                path.display(),
                &m.config_hash[..12.min(m.config_hash.len())],
                &self.config_hash[..12]
            )));
        }
        Ok(m)
    }

    pub fn optional(&self, class: Option<&str>, stage: Stage) -> Result<Option<RunManifest>> {
        match self.require(class, stage) {
            Ok(m) => Ok(Some(m)),
            Err(Error::Dependency { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.out).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }
}

/// Collects inputs and outputs while a stage runs, then writes its manifest.
pub struct StageRun<'a> {
    ctx: &'a Context,
    stage: Stage,
    class: Option<String>,
    started: Instant,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl<'a> StageRun<'a> {
    pub fn start(ctx: &'a Context, class: Option<&str>, stage: Stage) -> Result<Self> {
        let dir = ctx.stage_dir(class, stage);
        std::fs::create_dir_all(&dir)?;
        let stale = dir.join("manifest.json");
        if stale.exists() {
            std::fs::remove_file(stale)?;
        }
        Ok(StageRun {
            ctx,
            stage,
            class: class.map(str::to_string),
            started: Instant::now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn dir(&self) -> PathBuf {
        self.ctx.stage_dir(self.class.as_deref(), self.stage)
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::Dependency { stage: "upstream".into(), path: path.to_path_buf() });
        }
        self.inputs.insert(self.ctx.rel(path), file_sha256(path)?);
        Ok(())
    }

    /// Records an upstream manifest and every output it lists as inputs.
    pub fn input_manifest(&mut self, upstream: &RunManifest) {
        for (p, h) in &upstream.outputs {
            self.inputs.insert(p.clone(), h.clone());
        }
    }

    pub fn output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn finish(self) -> Result<RunManifest> {
        let mut outputs = BTreeMap::new();
        for p in &self.outputs {
            if p.is_dir() {
                for f in walk_files(p)? {
                    outputs.insert(self.ctx.rel(&f), file_sha256(&f)?);
                }
            } else {
                outputs.insert(self.ctx.rel(p), file_sha256(p)?);
            }
        }
        let manifest = RunManifest {
            stage: self.stage,
            class: self.class.clone(),
            config_hash: self.ctx.config_hash.clone(),
            seed: self.ctx.config.plan.seed,
            inputs: self.inputs,
            outputs,
            wall_time_ms: (!self.ctx.deterministic).then(|| self.started.elapsed().as_millis() as u64),
            warnings: self.warnings,
        };
        write_json_pretty(&self.ctx.manifest_path(self.class.as_deref(), self.stage), &manifest)?;
        Ok(manifest)
    }
}

/// Regular files under `root`, sorted.
pub fn walk_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Runs one stage for every selected class (or once, for `report`).
pub fn run_stage(ctx: &mut Context, stage: Stage) -> Result<Vec<RunManifest>> {
    if stage == Stage::Report {
        return Ok(vec![report(ctx)?]);
    }
    let classes: Vec<ClassSpec> = ctx.classes().into_iter().cloned().collect();
    let mut out = Vec::new();
    for class in &classes {
        log::info!("{stage} [{}]", class.name);
        out.push(match stage {
            Stage::Ingest => ingest(ctx, class)?,
            Stage::Stats => stats(ctx, class)?,
            Stage::Tier => tier(ctx, class)?,
            Stage::Sample => sample(ctx, class)?,
            Stage::Evidence => evidence(ctx, class)?,
            Stage::Generate => generate(ctx, class)?,
            Stage::Evaluate => evaluate(ctx, class)?,
            Stage::ProbeLengths => probe_lengths(ctx, class)?,
            Stage::ProbeLex => probe_lex(ctx, class)?,
            Stage::Report => unreachable!(),
        });
    }
    Ok(out)
}

/// Every stage in order.
pub fn run_all(ctx: &mut Context) -> Result<()> {
    for stage in Stage::ALL {
        run_stage(ctx, stage)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
