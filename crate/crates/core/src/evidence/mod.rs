//! Evidence bundles: plain-text Wikipedia pages packaged with each sampled
//! entity, and the on-disk dataset format.

mod dataset;
mod paragraphs;
mod wikitext;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::HttpClient;
use crate::mediawiki::{self, query_all, single_page};
use crate::par::{self, Mode};
use crate::popularity::Tier;
use crate::qid::Qid;
use crate::sampler::SampleEntry;
use crate::wikistats::WikiEndpoints;

pub use dataset::{read_dataset, write_dataset, Dataset, DatasetManifest};
pub use paragraphs::{line_blocks, segment_paragraphs, DEFAULT_MIN_PARAGRAPH_CHARS};
pub use wikitext::{strip_wikitext, strip_wikitext_checked, Stripped};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageSource {
    EntityPage,
    SearchHit,
    Inlink,
}

impl PageSource {
    pub const ALL: [PageSource; 3] = [PageSource::EntityPage, PageSource::SearchHit, PageSource::Inlink];

    pub fn as_str(self) -> &'static str {
        match self {
            PageSource::EntityPage => "entity_page",
            PageSource::SearchHit => "search_hit",
            PageSource::Inlink => "inlink",
        }
    }
}

impl fmt::Display for PageSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PageSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PageSource::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Load(format!("unknown page source {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub title: String,
    pub language: String,
    pub plaintext: String,
    #[serde(skip)]
    pub paragraphs: Vec<String>,
    pub source: PageSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redirected_from: Option<String>,
    /// Text came from the fallback wikitext parser rather than an extract.
    #[serde(default)]
    pub stripped: bool,
}

impl Page {
    pub fn new(title: &str, language: &str, text: &str, source: PageSource, min_paragraph_chars: usize) -> Self {
        let plaintext = line_blocks(text);
        let paragraphs = segment_paragraphs(&plaintext, min_paragraph_chars);
        Page {
            title: title.to_string(),
            language: language.to_string(),
            plaintext,
            paragraphs,
            source,
            redirected_from: None,
            stripped: false,
        }
    }

    fn from_fetched(fetched: Fetched, language: &str, source: PageSource, min_paragraph_chars: usize) -> Self {
        let mut page = Page::new(&fetched.title, language, &fetched.text, source, min_paragraph_chars);
        page.redirected_from = fetched.redirected_from;
        page.stripped = fetched.stripped;
        page
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceBundle {
    pub qid: Qid,
    pub language: String,
    pub tier: Tier,
    pub entity_page: Page,
    pub search_pages: Vec<Page>,
    pub inlink_pages: Vec<Page>,
    pub collected_at: String,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl EvidenceBundle {
    pub fn pages(&self) -> impl Iterator<Item = &Page> {
        std::iter::once(&self.entity_page).chain(&self.search_pages).chain(&self.inlink_pages)
    }

    pub fn validate(&self) -> Result<()> {
        if self.search_pages.len() > 10 {
            return Err(Error::validation(format!("{}: more than 10 search pages", self.qid)));
        }
        if self.tier != Tier::Tail && !self.inlink_pages.is_empty() {
            return Err(Error::validation(format!("{}: inlink pages on a {} entity", self.qid, self.tier)));
        }
        Ok(())
    }
}

/// Result of a plain-text fetch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fetched {
    /// Title after following a redirect.
    pub title: String,
    pub text: String,
    pub redirected_from: Option<String>,
    pub stripped: bool,
    pub unbalanced: bool,
}

fn redirect_of(json: &Value) -> Option<(String, String)> {
    let r = json.pointer("/query/redirects/0")?;
    Some((r.get("from")?.as_str()?.to_string(), r.get("to")?.as_str()?.to_string()))
}

/// Full-page plain text, preferring the API's extract and falling back to
/// stripping the page source. Redirects are followed once.
pub fn fetch_plaintext(client: &HttpClient, endpoints: &WikiEndpoints, title: &str, lang: &str) -> Result<Fetched> {
    let api = endpoints.api(lang);
    let pages = query_all(
        client,
        &api,
        &[
            ("prop", "extracts"),
            ("explaintext", "1"),
            ("exsectionformat", "plain"),
            ("redirects", "1"),
            ("titles", title),
        ],
    )?;
    let first = &pages[0];
    let redirect = redirect_of(first);
    let resolved = redirect.as_ref().map_or(title, |(_, to)| to.as_str()).to_string();
    let page = single_page(first, &resolved)?;
    let extract = page.get("extract").and_then(Value::as_str).unwrap_or_default();
    if !extract.trim().is_empty() {
        return Ok(Fetched {
            title: page.get("title").and_then(Value::as_str).unwrap_or(&resolved).to_string(),
            text: extract.to_string(),
            redirected_from: redirect.map(|(from, _)| from),
            stripped: false,
            unbalanced: false,
        });
    }
    let src_pages = query_all(
        client,
        &api,
        &[("prop", "revisions"), ("rvprop", "content"), ("rvslots", "main"), ("titles", &resolved)],
    )?;
    let page = single_page(&src_pages[0], &resolved)?;
    let source = page
        .pointer("/revisions/0/slots/main/content")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Protocol(format!("no extract or source for {resolved:?}")))?;
    let stripped = strip_wikitext_checked(source);
    Ok(Fetched {
        title: resolved,
        text: stripped.text,
        redirected_from: redirect.map(|(from, _)| from),
        stripped: true,
        unbalanced: stripped.unbalanced,
    })
}

/// Titles from the search API for `query`, default parameters.
pub fn search_titles(client: &HttpClient, endpoints: &WikiEndpoints, query: &str, lang: &str) -> Result<Vec<String>> {
    let url = endpoints.api(lang);
    let req = crate::http::HttpRequest::get_query(
        &url,
        &[("action", "query"), ("format", "json"), ("formatversion", "2"), ("list", "search"), ("srsearch", query)],
    );
    let json = client.fetch_json(&req)?;
    let hits = json
        .pointer("/query/search")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Protocol(format!("search response for {query:?} has no results list")))?;
    Ok(hits.iter().filter_map(|h| h.get("title")?.as_str().map(str::to_string)).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvidenceOptions {
    pub search_limit: usize,
    /// The tail's inlink pages are capped to keep bundles bounded.
    pub inlink_cap: usize,
    pub min_paragraph_chars: usize,
}

impl Default for EvidenceOptions {
    fn default() -> Self {
        EvidenceOptions { search_limit: 10, inlink_cap: 200, min_paragraph_chars: DEFAULT_MIN_PARAGRAPH_CHARS }
    }
}

fn flag(flags: &mut Vec<String>, what: String) {
    log::warn!("{what}");
    flags.push(what);
}

pub fn collect_bundle(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    entry: &SampleEntry,
    lang: &str,
    options: &EvidenceOptions,
    collected_at: &str,
) -> Result<EvidenceBundle> {
    let title = entry.titles.get(lang).ok_or_else(|| Error::validation(format!("{} has no {lang} page", entry.qid)))?;
    let min = options.min_paragraph_chars;
    let mut flags = Vec::new();
    let fetched = fetch_plaintext(client, endpoints, title, lang)?;
    if fetched.stripped {
        flags.push("entity_page_from_wikitext".to_string());
    }
    if fetched.unbalanced {
        flags.push("entity_page_unbalanced_markup".to_string());
    }
    let entity_page = Page::from_fetched(fetched, lang, PageSource::EntityPage, min);

    let mut seen: BTreeSet<String> = BTreeSet::new();
    seen.insert(entity_page.title.clone());
    seen.insert(title.clone());

    let mut search_pages = Vec::new();
    match search_titles(client, endpoints, title, lang) {
        Ok(hits) => {
            for hit in hits.into_iter().take(options.search_limit) {
                if seen.contains(&hit) {
                    continue;
                }
                match fetch_plaintext(client, endpoints, &hit, lang) {
                    Ok(f) if seen.insert(f.title.clone()) => {
                        seen.insert(hit);
                        search_pages.push(Page::from_fetched(f, lang, PageSource::SearchHit, min));
                    }
                    Ok(_) => {}
                    Err(Error::NotFound(_)) => flag(&mut flags, format!("search hit {hit:?} missing")),
                    Err(e) => return Err(e),
                }
            }
        }
        Err(e) if e.is_transport() || matches!(e, Error::NotFound(_)) => {
            flag(&mut flags, format!("search failed for {title:?}: {e}"));
        }
        Err(e) => return Err(e),
    }

    let mut inlink_pages = Vec::new();
    if entry.tier == Tier::Tail {
        let api = endpoints.api(lang);
        let linking = mediawiki::backlinks(client, &api, &entity_page.title, Some(options.inlink_cap + 1))?;
        if linking.len() > options.inlink_cap {
            flags.push(format!("inlinks_capped_at_{}", options.inlink_cap));
        }
        for t in linking.into_iter().take(options.inlink_cap) {
            if seen.contains(&t) {
                continue;
            }
            match fetch_plaintext(client, endpoints, &t, lang) {
                Ok(f) if seen.insert(f.title.clone()) => {
                    seen.insert(t);
                    inlink_pages.push(Page::from_fetched(f, lang, PageSource::Inlink, min));
                }
                Ok(_) => {}
                Err(Error::NotFound(_)) => flag(&mut flags, format!("inlink page {t:?} missing")),
                Err(e) => return Err(e),
            }
        }
    }

    Ok(EvidenceBundle {
        qid: entry.qid,
        language: lang.to_string(),
        tier: entry.tier,
        entity_page,
        search_pages,
        inlink_pages,
        collected_at: collected_at.to_string(),
        flags,
    })
}

/// Bundles for every (entry, language) pair that has a page, in sample order.
#[allow(clippy::too_many_arguments)]
pub fn collect_bundles(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    entries: &[SampleEntry],
    languages: &[String],
    options: &EvidenceOptions,
    collected_at: &str,
    mode: Mode,
    threads: usize,
) -> Result<Vec<EvidenceBundle>> {
    let jobs: Vec<(&SampleEntry, &String)> = entries
        .iter()
        .flat_map(|e| languages.iter().filter(|l| e.titles.contains_key(*l)).map(move |l| (e, l)))
        .collect();
    par::bounded(mode, threads, || {
        par::try_map(mode, &jobs, |(e, l)| collect_bundle(client, endpoints, e, l, options, collected_at))
    })
}
