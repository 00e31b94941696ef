//! Per-language Wikipedia popularity signals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::{HttpClient, HttpRequest};
use crate::ingest::EntityRecord;
use crate::mediawiki::{self, query_all, single_page};
use crate::par::{self, Mode};
use crate::qid::Qid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::validation(format!("month {month} out of range")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }

    /// `YYYYMM0100`, the timestamp format of the pageviews API.
    pub fn api_timestamp(self) -> String {
        format!("{:04}{:02}0100", self.year, self.month)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, m) = s.split_once('-').ok_or_else(|| Error::validation(format!("expected YYYY-MM, got {s:?}")))?;
        let year = y.parse().map_err(|_| Error::validation(format!("bad year in {s:?}")))?;
        let month = m.parse().map_err(|_| Error::validation(format!("bad month in {s:?}")))?;
        YearMonth::new(year, month)
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of calendar months. `start > end` is the empty window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageviewWindow {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl PageviewWindow {
    pub fn calendar_year(year: i32) -> Self {
        PageviewWindow { start: YearMonth { year, month: 1 }, end: YearMonth { year, month: 12 } }
    }

    pub fn months(&self) -> Vec<YearMonth> {
        let mut out = Vec::new();
        let mut m = self.start;
        while m <= self.end {
            out.push(m);
            m = m.succ();
        }
        out
    }
}

impl Default for PageviewWindow {
    fn default() -> Self {
        Self::calendar_year(2024)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WikiEndpoints {
    /// Base of the per-article pageviews REST route.
    pub pageviews: String,
    /// Action API URL with a `{lang}` placeholder.
    pub api_template: String,
}

impl Default for WikiEndpoints {
    fn default() -> Self {
        WikiEndpoints {
            pageviews: "https://wikimedia.org/api/rest_v1/metrics/pageviews/per-article".into(),
            api_template: "https://{lang}.wikipedia.org/w/api.php".into(),
        }
    }
}

impl WikiEndpoints {
    pub fn api(&self, lang: &str) -> String {
        self.api_template.replace("{lang}", lang)
    }
}

fn path_title(title: &str) -> String {
    let underscored = title.replace(' ', "_");
    url::form_urlencoded::byte_serialize(underscored.as_bytes()).collect::<String>().replace('+', "%20")
}

/// Sum of monthly user pageviews over `window`. Every month of the window
/// must be present in the response.
pub fn fetch_pageviews(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    title: &str,
    lang: &str,
    window: &PageviewWindow,
) -> Result<u64> {
    let months = window.months();
    if months.is_empty() {
        return Err(Error::validation("pageview window covers zero months"));
    }
    let url = format!(
        "{}/{lang}.wikipedia/all-access/user/{}/monthly/{}/{}",
        endpoints.pageviews.trim_end_matches('/'),
        path_title(title),
        window.start.api_timestamp(),
        window.end.api_timestamp(),
    );
    let json = client.fetch_json(&HttpRequest::get(url))?;
    let items = json
        .get("items")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Protocol(format!("pageviews response for {title:?} has no items")))?;
    let mut by_month: BTreeMap<String, u64> = BTreeMap::new();
    for item in items {
        let ts = item.get("timestamp").and_then(Value::as_str).unwrap_or_default();
        let views = item.get("views").and_then(Value::as_u64).unwrap_or(0);
        if ts.len() >= 6 {
            *by_month.entry(ts[..6].to_string()).or_default() += views;
        }
    }
    let mut total = 0u64;
    for m in &months {
        let key = format!("{:04}{:02}", m.year, m.month);
        let views = by_month.get(&key).ok_or_else(|| {
            Error::validation(format!("pageviews for {title:?} do not cover {m}; window must be complete"))
        })?;
        total += views;
    }
    Ok(total)
}

pub fn fetch_inlinks(client: &HttpClient, endpoints: &WikiEndpoints, title: &str, lang: &str) -> Result<u64> {
    Ok(mediawiki::backlinks(client, &endpoints.api(lang), title, None)?.len() as u64)
}

/// Number of revisions of the page, bot edits included.
pub fn fetch_edits(client: &HttpClient, endpoints: &WikiEndpoints, title: &str, lang: &str) -> Result<u64> {
    let pages = query_all(
        client,
        &endpoints.api(lang),
        &[("prop", "revisions"), ("titles", title), ("rvprop", "ids"), ("rvlimit", "500")],
    )?;
    let mut n = 0u64;
    for p in &pages {
        let page = single_page(p, title)?;
        n += page.get("revisions").and_then(Value::as_array).map_or(0, |r| r.len() as u64);
    }
    Ok(n)
}

/// Current-revision length as reported by the API (wikitext bytes).
pub fn fetch_page_length(client: &HttpClient, endpoints: &WikiEndpoints, title: &str, lang: &str) -> Result<u64> {
    let pages = query_all(client, &endpoints.api(lang), &[("prop", "info"), ("titles", title)])?;
    let page = single_page(&pages[0], title)?;
    Ok(page.get("length").and_then(Value::as_u64).unwrap_or(0))
}

fn strip_namespace(title: &str) -> &str {
    title.split_once(':').map_or(title, |(_, rest)| rest)
}

/// Stub rule: a transcluded template whose name ends in `-stub`, or a
/// category whose name contains `stub` (Chinese wikis: `小作品`).
pub fn is_stub_marked<'a>(
    templates: impl IntoIterator<Item = &'a str>,
    categories: impl IntoIterator<Item = &'a str>,
) -> bool {
    templates.into_iter().any(|t| strip_namespace(t).trim().to_lowercase().ends_with("-stub"))
        || categories.into_iter().any(|c| {
            let name = strip_namespace(c).to_lowercase();
            name.contains("stub") || name.contains("小作品")
        })
}

pub fn detect_stub(client: &HttpClient, endpoints: &WikiEndpoints, title: &str, lang: &str) -> Result<bool> {
    let pages = query_all(
        client,
        &endpoints.api(lang),
        &[("prop", "templates|categories"), ("titles", title), ("tllimit", "500"), ("cllimit", "500")],
    )?;
    let mut templates = Vec::new();
    let mut categories = Vec::new();
    for p in &pages {
        let page = single_page(p, title)?;
        for (key, sink) in [("templates", &mut templates), ("categories", &mut categories)] {
            if let Some(items) = page.get(key).and_then(Value::as_array) {
                sink.extend(items.iter().filter_map(|i| i.get("title")?.as_str().map(str::to_string)));
            }
        }
    }
    Ok(is_stub_marked(templates.iter().map(String::as_str), categories.iter().map(String::as_str)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageSignals {
    pub pageviews: u64,
    pub inlinks: u64,
    pub edits: u64,
    pub page_length_chars: u64,
    pub is_stub: bool,
}

/// All popularity proxies for one entity. Languages without a page are
/// absent from `signals` rather than zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityProfile {
    pub qid: Qid,
    pub window: PageviewWindow,
    pub signals: BTreeMap<String, LanguageSignals>,
    pub triple_count: u64,
}

impl PopularityProfile {
    pub fn lang(&self, lang: &str) -> Option<&LanguageSignals> {
        self.signals.get(lang)
    }
}

pub fn collect_signals(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    title: &str,
    lang: &str,
    window: &PageviewWindow,
) -> Result<LanguageSignals> {
    Ok(LanguageSignals {
        pageviews: fetch_pageviews(client, endpoints, title, lang, window)?,
        inlinks: fetch_inlinks(client, endpoints, title, lang)?,
        edits: fetch_edits(client, endpoints, title, lang)?,
        page_length_chars: fetch_page_length(client, endpoints, title, lang)?,
        is_stub: detect_stub(client, endpoints, title, lang)?,
    })
}

pub fn collect_profile(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    record: &EntityRecord,
    languages: &[String],
    window: &PageviewWindow,
) -> Result<PopularityProfile> {
    let mut signals = BTreeMap::new();
    for lang in languages {
        let Some(title) = record.title(lang) else { continue };
        match collect_signals(client, endpoints, title, lang, window) {
            Ok(s) => {
                signals.insert(lang.clone(), s);
            }
            Err(Error::NotFound(what)) => log::warn!("{}: {lang} page missing ({what})", record.qid),
            Err(e) => return Err(e),
        }
    }
    Ok(PopularityProfile { qid: record.qid, window: *window, signals, triple_count: record.triple_count })
}

pub fn collect_profiles(
    client: &HttpClient,
    endpoints: &WikiEndpoints,
    records: &[EntityRecord],
    languages: &[String],
    window: &PageviewWindow,
    mode: Mode,
    threads: usize,
) -> Result<Vec<PopularityProfile>> {
    par::bounded(mode, threads, || {
        par::try_map(mode, records, |r| collect_profile(client, endpoints, r, languages, window))
    })
}
