use serde::{Deserialize, Serialize};

use crate::llm::{ChatClient, ChatMessage};
use crate::qid::Qid;

use super::{AtomicFact, EvidenceConfig, FactPrompts, ScoredParagraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Supported,
    NotSupported,
    Abstain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub qid: Qid,
    pub language: String,
    pub fact_index: usize,
    pub fact: String,
    pub config: EvidenceConfig,
    pub label: Label,
    pub paragraphs: Vec<ScoredParagraph>,
    pub raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The first standalone "true" or "false" decides; anything else abstains.
pub fn parse_judgement(raw: &str) -> Label {
    for word in raw.split(|c: char| !c.is_alphanumeric()) {
        if word.eq_ignore_ascii_case("true") {
            return Label::Supported;
        }
        if word.eq_ignore_ascii_case("false") {
            return Label::NotSupported;
        }
    }
    Label::Abstain
}

pub fn verification_prompt(prompts: &FactPrompts, topic: &str, fact: &str, paragraphs: &[ScoredParagraph]) -> String {
    let evidence = paragraphs
        .iter()
        .map(|p| format!("Title: {}\nText: {}", p.reference.title, p.text))
        .collect::<Vec<_>>()
        .join("\n\n");
    prompts.verify.replace("{topic}", topic).replace("{evidence}", &evidence).replace("{fact}", fact)
}

/// Asks the judge whether `fact` is supported by `paragraphs`. Endpoint
/// failures and empty evidence yield an abstention with a note.
pub fn verify_fact(
    client: &ChatClient,
    fact: &AtomicFact,
    topic: &str,
    paragraphs: Vec<ScoredParagraph>,
    config: EvidenceConfig,
    prompts: &FactPrompts,
) -> Verdict {
    let mut verdict = Verdict {
        qid: fact.qid,
        language: fact.language.clone(),
        fact_index: fact.index,
        fact: fact.text.clone(),
        config,
        label: Label::Abstain,
        paragraphs: Vec::new(),
        raw: String::new(),
        error: None,
    };
    if paragraphs.is_empty() {
        verdict.error = Some("no evidence paragraphs".into());
        return verdict;
    }
    let prompt = verification_prompt(prompts, topic, &fact.text, &paragraphs);
    verdict.paragraphs = paragraphs;
    match client.chat(vec![ChatMessage::user(prompt)]) {
        Ok(raw) => {
            verdict.label = parse_judgement(&raw);
            verdict.raw = raw;
        }
        Err(e) => verdict.error = Some(e.to_string()),
    }
    verdict
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityScore {
    pub supported: usize,
    pub not_supported: usize,
    pub abstained: usize,
    pub facts: usize,
    pub precision: f64,
}

/// Supported over all verdicts; abstentions count against precision.
pub fn score_entity(verdicts: &[Verdict]) -> Option<EntityScore> {
    if verdicts.is_empty() {
        return None;
    }
    let count = |l: Label| verdicts.iter().filter(|v| v.label == l).count();
    let supported = count(Label::Supported);
    Some(EntityScore {
        supported,
        not_supported: count(Label::NotSupported),
        abstained: count(Label::Abstain),
        facts: verdicts.len(),
        precision: supported as f64 / verdicts.len() as f64,
    })
}
