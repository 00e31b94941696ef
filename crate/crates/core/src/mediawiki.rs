//! MediaWiki action API helpers shared by the ingest, stats and evidence stages.

use std::collections::BTreeMap;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::http::{HttpClient, HttpRequest};

/// Runs an `action=query` request and follows `continue` until exhausted,
/// returning every response page in order.
pub fn query_all(client: &HttpClient, api: &str, params: &[(&str, &str)]) -> Result<Vec<Value>> {
    let mut pages = Vec::new();
    let mut cont: BTreeMap<String, String> = BTreeMap::new();
    loop {
        let mut all: Vec<(&str, &str)> = vec![("action", "query"), ("format", "json"), ("formatversion", "2")];
        all.extend_from_slice(params);
        for (k, v) in &cont {
            all.push((k.as_str(), v.as_str()));
        }
        let json = client.fetch_json(&HttpRequest::get_query(api, &all))?;
        if let Some(err) = json.get("error") {
            return Err(Error::Protocol(format!("MediaWiki API error: {err}")));
        }
        let next = json.get("continue").and_then(Value::as_object).map(|m| {
            m.iter()
                .map(|(k, v)| (k.clone(), v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())))
                .collect::<BTreeMap<_, _>>()
        });
        pages.push(json);
        match next {
            Some(c) if !c.is_empty() && c != cont => cont = c,
            _ => break,
        }
    }
    Ok(pages)
}

/// Titles of pages (namespace 0) linking to `title`, capped at `limit`.
pub fn backlinks(client: &HttpClient, api: &str, title: &str, limit: Option<usize>) -> Result<Vec<String>> {
    let pages =
        query_all(client, api, &[("list", "backlinks"), ("bltitle", title), ("blnamespace", "0"), ("bllimit", "500")])?;
    let mut titles = Vec::new();
    for page in &pages {
        if let Some(items) = page.pointer("/query/backlinks").and_then(Value::as_array) {
            for item in items {
                if let Some(t) = item.get("title").and_then(Value::as_str) {
                    titles.push(t.to_string());
                    if limit.is_some_and(|l| titles.len() >= l) {
                        return Ok(titles);
                    }
                }
            }
        }
    }
    Ok(titles)
}

/// The single page object of a `titles=` query (formatversion 2), or
/// not-found when the page is missing.
pub fn single_page<'a>(json: &'a Value, title: &str) -> Result<&'a Value> {
    let page =
        json.pointer("/query/pages/0").ok_or_else(|| Error::Protocol(format!("no page object for {title:?}")))?;
    if page.get("missing").is_some_and(|m| m.as_bool().unwrap_or(true)) || page.get("invalid").is_some() {
        return Err(Error::NotFound(format!("page {title:?}")));
    }
    Ok(page)
}
