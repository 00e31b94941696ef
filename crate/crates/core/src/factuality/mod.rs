//! Fact-level factuality scoring: atomic fact extraction, BM25 evidence
//! ranking, judge verification and precision aggregation.
//!
//! The ranker is a lexical stand-in; reports label it as BM25.

mod bm25;
mod facts;
mod report;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evidence::EvidenceBundle;
use crate::llm::ChatClient;
use crate::par::{self, Mode};

pub use bm25::{
    build_index, is_cjk, is_cjk_token, pages_for, rank_paragraphs, tokenize, Bm25Params, EvidenceConfig, IndexEntry,
    ParagraphIndex, ParagraphRef, ScoredParagraph,
};
pub use facts::{extract_facts, extraction_prompt, parse_fact_list, AtomicFact};
pub use report::{aggregate, Dimension, EntityPrecision, FactualityReport, GroupKey, GroupStats};
pub use verify::{parse_judgement, score_entity, verification_prompt, verify_fact, EntityScore, Label, Verdict};

pub const DEFAULT_TOP_K: usize = 5;

/// Extraction and verification prompt templates.
///
/// Extraction placeholders: `{topic}`, `{context}` (full generation),
/// `{window}` (the sentence with its neighbours) and `{sentence}`.
/// Verification placeholders: `{topic}`, `{evidence}` and `{fact}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactPrompts {
    pub extract: String,
    pub verify: String,
}

impl Default for FactPrompts {
    fn default() -> Self {
        FactPrompts {
            extract: "Text about {topic}:\n{context}\n\n\
                Break the sentence below into independent atomic facts about {topic}. \
                Each fact must be self-contained: name its subject explicitly instead of using pronouns, \
                and use the surrounding sentences only to resolve references. \
                Write one fact per line, each starting with \"- \".\n\n\
                Surrounding sentences: {window}\n\n\
                Sentence: {sentence}"
                .into(),
            verify: "Answer the question about {topic} based on the given context.\n\n\
                {evidence}\n\n\
                Input: {fact} True or False?\n\
                Answer with exactly \"True\" or \"False\".\n\
                Output:"
                .into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeOptions {
    pub bm25: Bm25Params,
    pub top_k: usize,
}

impl Default for JudgeOptions {
    fn default() -> Self {
        JudgeOptions { bm25: Bm25Params::default(), top_k: DEFAULT_TOP_K }
    }
}

/// Verdicts for every fact under every configuration that applies to the
/// bundle's tier, ordered by fact index then configuration.
pub fn evaluate_facts(
    judge: &ChatClient,
    facts: &[AtomicFact],
    bundle: &EvidenceBundle,
    topic: &str,
    configs: &[EvidenceConfig],
    options: &JudgeOptions,
    prompts: &FactPrompts,
    mode: Mode,
) -> Result<Vec<Verdict>> {
    let mut verdicts = Vec::new();
    for &config in configs.iter().filter(|c| c.applies_to(bundle.tier)) {
        let index = build_index(bundle, config, options.bm25)?;
        let queries: Vec<String> = facts.iter().map(|f| f.text.clone()).collect();
        let ranked = index.rank_batch(&queries, options.top_k, mode);
        let jobs: Vec<(&AtomicFact, Vec<ScoredParagraph>)> = facts.iter().zip(ranked).collect();
        verdicts.extend(par::map(mode, &jobs, |(fact, paragraphs)| {
            verify_fact(judge, fact, topic, paragraphs.clone(), config, prompts)
        }));
    }
    verdicts.sort_by_key(|v| (v.fact_index, v.config));
    Ok(verdicts)
}
