use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{EvidenceBundle, Page, PageSource};
use crate::par::{self, Mode};
use crate::popularity::Tier;

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // unified ideographs
        | 0xAC00..=0xD7AF    // hangul
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F) // extensions B and up
}

pub fn is_cjk_token(t: &str) -> bool {
    t.chars().next().is_some_and(is_cjk)
}

/// Lowercase and split on anything that is not alphanumeric. Runs of CJK
/// characters become overlapping character bigrams (a lone character stays
/// a unigram).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let lower = text.to_lowercase();
    for word in lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let mut latin = String::new();
        let mut cjk: Vec<char> = Vec::new();
        let flush_cjk = |cjk: &mut Vec<char>, out: &mut Vec<String>| {
            match cjk.len() {
                0 => {}
                1 => out.push(cjk[0].to_string()),
                _ => out.extend(cjk.windows(2).map(|w| w.iter().collect::<String>())),
            }
            cjk.clear();
        };
        for c in word.chars() {
            if is_cjk(c) {
                if !latin.is_empty() {
                    out.push(std::mem::take(&mut latin));
                }
                cjk.push(c);
            } else {
                flush_cjk(&mut cjk, &mut out);
                latin.push(c);
            }
        }
        flush_cjk(&mut cjk, &mut out);
        if !latin.is_empty() {
            out.push(latin);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvidenceConfig {
    #[serde(rename = "one-page")]
    OnePage,
    #[serde(rename = "search")]
    PlusSearch,
    #[serde(rename = "links")]
    PlusLinks,
}

impl EvidenceConfig {
    pub const ALL: [EvidenceConfig; 3] =
        [EvidenceConfig::OnePage, EvidenceConfig::PlusSearch, EvidenceConfig::PlusLinks];

    pub fn as_str(self) -> &'static str {
        match self {
            EvidenceConfig::OnePage => "one-page",
            EvidenceConfig::PlusSearch => "search",
            EvidenceConfig::PlusLinks => "links",
        }
    }

    /// Whether this configuration applies to an entity of `tier`.
    pub fn applies_to(self, tier: Tier) -> bool {
        self != EvidenceConfig::PlusLinks || tier == Tier::Tail
    }
}

impl fmt::Display for EvidenceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvidenceConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EvidenceConfig::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown evidence config {s:?} (one-page, search, links)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Where a paragraph came from: page order within the bundle, then position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParagraphRef {
    pub page: usize,
    pub position: usize,
    pub title: String,
    pub source: PageSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub reference: ParagraphRef,
    pub text: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParagraphIndex {
    pub entries: Vec<IndexEntry>,
    pub params: Bm25Params,
    pub avg_len: f64,
    doc_freq: HashMap<String, usize>,
    /// term -> (entry, term frequency), entries ascending
    postings: HashMap<String, Vec<(usize, u32)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredParagraph {
    pub reference: ParagraphRef,
    pub score: f64,
    #[serde(skip)]
    pub text: String,
}

impl ParagraphIndex {
    pub fn from_pages<'a>(pages: impl IntoIterator<Item = &'a Page>, params: Bm25Params) -> Self {
        let mut entries = Vec::new();
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
        for (page_no, page) in pages.into_iter().enumerate() {
            for (position, para) in page.paragraphs.iter().enumerate() {
                let id = entries.len();
                let tokens = tokenize(para);
                let mut tf: HashMap<&str, u32> = HashMap::new();
                for t in &tokens {
                    *tf.entry(t.as_str()).or_default() += 1;
                }
                for (t, n) in tf {
                    *doc_freq.entry(t.to_string()).or_default() += 1;
                    postings.entry(t.to_string()).or_default().push((id, n));
                }
                entries.push(IndexEntry {
                    reference: ParagraphRef { page: page_no, position, title: page.title.clone(), source: page.source },
                    text: para.clone(),
                    len: tokens.len(),
                });
            }
        }
        let avg_len = if entries.is_empty() {
            0.0
        } else {
            entries.iter().map(|e| e.len as f64).sum::<f64>() / entries.len() as f64
        };
        ParagraphIndex { entries, params, avg_len, doc_freq, postings }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.entries.len() as f64;
        let df = self.doc_freq(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Per-term contribution; shared with the exhaustive scorer in tests.
    pub fn term_score(&self, idf: f64, tf: f64, len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let norm = if self.avg_len > 0.0 { len as f64 / self.avg_len } else { 0.0 };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))
    }

    /// Distinct query terms in sorted order; scores are summed in this order.
    pub fn query_terms(query: &str) -> Vec<String> {
        tokenize(query).into_iter().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// BM25 scores of every entry for `query`.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.entries.len()];
        for term in Self::query_terms(query) {
            let Some(posting) = self.postings.get(&term) else { continue };
            let idf = self.idf(&term);
            for &(doc, tf) in posting {
                scores[doc] += self.term_score(idf, tf as f64, self.entries[doc].len);
            }
        }
        scores
    }

    /// Top `k` paragraphs, ties broken by page order then position.
    pub fn rank(&self, query: &str, k: usize) -> Vec<ScoredParagraph> {
        let scores = self.scores(query);
        let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        let mut order: Vec<usize> = (0..scores.len()).collect();
        if k > 0 && k < order.len() {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_by(cmp);
        order
            .into_iter()
            .take(k)
            .map(|i| ScoredParagraph {
                reference: self.entries[i].reference.clone(),
                score: scores[i],
                text: self.entries[i].text.clone(),
            })
            .collect()
    }

    pub fn rank_batch(&self, queries: &[String], k: usize, mode: Mode) -> Vec<Vec<ScoredParagraph>> {
        par::map(mode, queries, |q| self.rank(q, k))
    }
}

/// Pages visible under `config`, in bundle order.
pub fn pages_for(bundle: &EvidenceBundle, config: EvidenceConfig) -> Result<Vec<&Page>> {
    if !config.applies_to(bundle.tier) {
        return Err(Error::config(format!(
            "{}: evidence config `{config}` only applies to tail entities, not {}",
            bundle.qid, bundle.tier
        )));
    }
    let mut pages = vec![&bundle.entity_page];
    if config != EvidenceConfig::OnePage {
        pages.extend(&bundle.search_pages);
    }
    if config == EvidenceConfig::PlusLinks {
        pages.extend(&bundle.inlink_pages);
    }
    Ok(pages)
}

pub fn build_index(bundle: &EvidenceBundle, config: EvidenceConfig, params: Bm25Params) -> Result<ParagraphIndex> {
    Ok(ParagraphIndex::from_pages(pages_for(bundle, config)?, params))
}

pub fn rank_paragraphs(index: &ParagraphIndex, query: &str, k: usize) -> Vec<ScoredParagraph> {
    index.rank(query, k)
}
