use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{split_sentences, ChatClient, ChatMessage, GenerationRecord};
use crate::qid::Qid;

use super::FactPrompts;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicFact {
    pub qid: Qid,
    pub language: String,
    /// Position within the generation, counting from 0.
    pub index: usize,
    /// Sentence of the generation the fact was extracted from.
    pub sentence: usize,
    pub text: String,
}

static LIST_ITEM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*(?:[-*•·]|\d{1,3}[.)、])\s*(.+?)\s*$").unwrap());

/// Items of a bulleted or numbered list; anything else is dropped.
pub fn parse_fact_list(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|line| LIST_ITEM.captures(line))
        .map(|c| c[1].to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Prompt for sentence `i`: the full generation as context plus the sentence
/// and its neighbours.
pub fn extraction_prompt(prompts: &FactPrompts, topic: &str, full: &str, sentences: &[String], i: usize) -> String {
    let lo = i.saturating_sub(1);
    let hi = (i + 2).min(sentences.len());
    prompts
        .extract
        .replace("{topic}", topic)
        .replace("{context}", full.trim())
        .replace("{window}", &sentences[lo..hi].join(" "))
        .replace("{sentence}", &sentences[i])
}

pub fn extract_facts(
    client: &ChatClient,
    generation: &GenerationRecord,
    topic: &str,
    prompts: &FactPrompts,
) -> Result<Vec<AtomicFact>> {
    if generation.response.trim().is_empty() {
        return Err(Error::validation(format!("{} [{}]: empty generation", generation.qid, generation.language)));
    }
    let sentences = split_sentences(&generation.response, &generation.language);
    let mut facts = Vec::new();
    for i in 0..sentences.len() {
        let prompt = extraction_prompt(prompts, topic, &generation.response, &sentences, i);
        let reply = client.chat(vec![ChatMessage::user(prompt)])?;
        for text in parse_fact_list(&reply) {
            facts.push(AtomicFact {
                qid: generation.qid,
                language: generation.language.clone(),
                index: facts.len(),
                sentence: i,
                text,
            });
        }
    }
    Ok(facts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn list_parsing() {
        assert_eq!(parse_fact_list("- A\n- B"), ["A", "B"]);
        assert_eq!(parse_fact_list("Here are the facts:\n1. A\n\n2) B\n* C\nThanks!"), ["A", "B", "C"]);
        assert_eq!(parse_fact_list("1、长江是河流。\n• x"), ["长江是河流。", "x"]);
        assert!(parse_fact_list("no list here\n-\n").is_empty());
    }

    #[test]
    fn window_clamps_at_edges() {
        let s: Vec<String> = ["A.", "B.", "C."].iter().map(|x| x.to_string()).collect();
        let p = FactPrompts { extract: "{window}|{sentence}".into(), ..Default::default() };
        assert_eq!(extraction_prompt(&p, "t", "", &s, 0), "A. B.|A.");
        assert_eq!(extraction_prompt(&p, "t", "", &s, 1), "A. B. C.|B.");
        assert_eq!(extraction_prompt(&p, "t", "", &s, 2), "B. C.|C.");
    }
}
