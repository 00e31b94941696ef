//! A deterministic, in-memory stand-in for the Wikimedia services the
//! pipeline talks to: SPARQL, the Wikidata entity API, per-language
//! MediaWiki action APIs and the pageviews REST route.
//!
//! The world is generated from a seed and served through [`Transport`], so
//! every stage can run offline end to end and be recorded into the response
//! cache for replay.

pub(crate) mod text;
mod world;

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::http::{HttpRequest, HttpResponse, Transport, TransportFailure};
use crate::ingest::IngestEndpoints;
use crate::wikistats::WikiEndpoints;

pub use world::{SimConfig, SimItem, SimPage, SimWiki, SimWorld};

pub const SPARQL_URL: &str = "https://query.sim.invalid/sparql";
pub const WIKIDATA_API: &str = "https://www.sim.invalid/w/api.php";
pub const WIKI_API_TEMPLATE: &str = "https://{lang}.sim.invalid/w/api.php";
pub const PAGEVIEWS_URL: &str = "https://pageviews.sim.invalid/per-article";

/// Max items per list response before a `continue` token is issued.
const LIST_PAGE: usize = 500;

pub fn ingest_endpoints() -> IngestEndpoints {
    IngestEndpoints { sparql: SPARQL_URL.into(), wikidata_api: WIKIDATA_API.into() }
}

pub fn wiki_endpoints() -> WikiEndpoints {
    WikiEndpoints { pageviews: PAGEVIEWS_URL.into(), api_template: WIKI_API_TEMPLATE.into() }
}

fn ok(v: Value) -> Result<HttpResponse, TransportFailure> {
    Ok(HttpResponse::ok(v.to_string()))
}

fn bad(msg: &str) -> Result<HttpResponse, TransportFailure> {
    Ok(HttpResponse::status(400, json!({"error": msg}).to_string()))
}

fn params(req: &HttpRequest) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> =
        url::Url::parse(&req.url).map(|u| u.query_pairs().into_owned().collect()).unwrap_or_default();
    if req.content_type.as_deref() == Some("application/x-www-form-urlencoded") {
        if let Some(body) = &req.body {
            out.extend(url::form_urlencoded::parse(body.as_bytes()).into_owned());
        }
    }
    out
}

/// A slice of `items` starting at the offset in `token`, plus the next token.
fn paged<T: Clone>(items: &[T], token: Option<&String>) -> (Vec<T>, Option<usize>) {
    let start = token.and_then(|t| t.parse().ok()).unwrap_or(0usize).min(items.len());
    let end = (start + LIST_PAGE).min(items.len());
    (items[start..end].to_vec(), (end < items.len()).then_some(end))
}

impl Transport for SimWorld {
    fn send(&self, req: &HttpRequest) -> Result<HttpResponse, TransportFailure> {
        let Ok(url) = url::Url::parse(&req.url) else {
            return bad("unparseable url");
        };
        let host = url.host_str().unwrap_or_default().to_string();
        if req.url.starts_with(SPARQL_URL) {
            return self.sparql(req);
        }
        if req.url.starts_with(PAGEVIEWS_URL) {
            return self.pageviews(url.path());
        }
        if req.url.starts_with(WIKIDATA_API) {
            return self.wikidata(&params(req));
        }
        if let Some(lang) = host.strip_suffix(".sim.invalid") {
            if let Some(wiki) = self.wikis.get(lang) {
                return self.mediawiki(wiki, &params(req));
            }
        }
        Ok(HttpResponse::status(404, "no such host"))
    }
}

impl SimWorld {
    fn sparql(&self, req: &HttpRequest) -> Result<HttpResponse, TransportFailure> {
        let p = params(req);
        let Some(query) = p.get("query") else {
            return bad("missing query");
        };
        let grab = |re: &str| regex::Regex::new(re).unwrap().captures(query).map(|c| c[1].to_string());
        let class = grab(r"wd:(Q\d+)").unwrap_or_default();
        let limit: usize = grab(r"LIMIT\s+(\d+)").and_then(|s| s.parse().ok()).unwrap_or(usize::MAX);
        let offset: usize = grab(r"OFFSET\s+(\d+)").and_then(|s| s.parse().ok()).unwrap_or(0);
        let langs: Vec<String> = regex::Regex::new(r"\?title_(\w+)\s")
            .unwrap()
            .captures_iter(query)
            .map(|c| c[1].to_string())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let members: Vec<_> = if class == self.class_qid { self.members() } else { Vec::new() };
        let mut bindings = Vec::new();
        for item in members.iter().skip(offset).take(limit) {
            let mut b = serde_json::Map::new();
            b.insert("x".into(), json!({"type": "uri", "value": item.qid.iri()}));
            for lang in &langs {
                if let Some(l) = item.labels.get(lang) {
                    b.insert(format!("label_{lang}"), json!({"type": "literal", "xml:lang": lang, "value": l}));
                }
                if let Some(t) = item.sitelinks.get(lang) {
                    b.insert(format!("title_{lang}"), json!({"type": "literal", "xml:lang": lang, "value": t}));
                }
            }
            bindings.push(Value::Object(b));
        }
        ok(json!({"head": {"vars": ["x"]}, "results": {"bindings": bindings}}))
    }

    fn wikidata(&self, p: &BTreeMap<String, String>) -> Result<HttpResponse, TransportFailure> {
        match p.get("action").map(String::as_str) {
            Some("wbgetentities") => {
                let props = p.get("props").cloned().unwrap_or_default();
                let mut entities = serde_json::Map::new();
                for id in p.get("ids").map(String::as_str).unwrap_or_default().split('|') {
                    let ent = id
                        .parse()
                        .ok()
                        .and_then(|q| self.items.get(&q))
                        .map(|item| item.to_json(&props))
                        .unwrap_or_else(|| json!({"id": id, "missing": ""}));
                    entities.insert(id.to_string(), ent);
                }
                ok(json!({"entities": entities}))
            }
            Some("query") if p.get("list").map(String::as_str) == Some("backlinks") => {
                let title = p.get("bltitle").cloned().unwrap_or_default();
                let links = title.parse().ok().and_then(|q| self.items.get(&q)).map(|i| i.incoming.clone());
                self.backlink_response(&links.unwrap_or_default(), p.get("blcontinue"))
            }
            _ => bad("unsupported wikidata action"),
        }
    }

    fn backlink_response(&self, links: &[String], token: Option<&String>) -> Result<HttpResponse, TransportFailure> {
        let (chunk, next) = paged(links, token);
        let items: Vec<Value> = chunk.iter().map(|t| json!({"ns": 0, "title": t})).collect();
        let mut body = json!({"batchcomplete": true, "query": {"backlinks": items}});
        if let Some(n) = next {
            body["continue"] = json!({"blcontinue": n.to_string(), "continue": "-||"});
        }
        ok(body)
    }

    fn mediawiki(&self, wiki: &SimWiki, p: &BTreeMap<String, String>) -> Result<HttpResponse, TransportFailure> {
        if p.get("action").map(String::as_str) != Some("query") {
            return bad("unsupported action");
        }
        match p.get("list").map(String::as_str) {
            Some("backlinks") => {
                let title = p.get("bltitle").cloned().unwrap_or_default();
                let links = wiki.pages.get(&title).map(|pg| pg.backlinks.clone()).unwrap_or_default();
                return self.backlink_response(&links, p.get("blcontinue"));
            }
            Some("search") => {
                let hits: Vec<Value> = wiki
                    .search(p.get("srsearch").map(String::as_str).unwrap_or_default(), 10)
                    .into_iter()
                    .map(|t| json!({"ns": 0, "title": t}))
                    .collect();
                return ok(
                    json!({"batchcomplete": true, "query": {"searchinfo": {"totalhits": hits.len()}, "search": hits}}),
                );
            }
            Some(_) => return bad("unsupported list"),
            None => {}
        }
        let Some(requested) = p.get("titles") else {
            return bad("missing titles");
        };
        let mut query = serde_json::Map::new();
        let mut title = requested.clone();
        if p.contains_key("redirects") {
            if let Some(target) = wiki.redirects.get(requested) {
                query.insert("redirects".into(), json!([{"from": requested, "to": target}]));
                title = target.clone();
            }
        }
        let Some(page) = wiki.pages.get(&title) else {
            query.insert("pages".into(), json!([{"ns": 0, "title": title, "missing": true}]));
            return ok(json!({"batchcomplete": true, "query": query}));
        };
        let mut obj = json!({"pageid": page.pageid, "ns": 0, "title": title});
        let mut cont: Option<Value> = None;
        let props = p.get("prop").cloned().unwrap_or_default();
        for prop in props.split('|') {
            match prop {
                "extracts" => {
                    if let Some(e) = &page.extract {
                        obj["extract"] = json!(e);
                    }
                }
                "info" => obj["length"] = json!(page.wikitext.chars().count()),
                "revisions" if p.get("rvprop").map(String::as_str) == Some("content") => {
                    obj["revisions"] =
                        json!([{"slots": {"main": {"contentmodel": "wikitext", "content": page.wikitext}}}]);
                }
                "revisions" => {
                    let ids: Vec<u64> = (1..=page.revisions).map(|r| page.pageid * 10_000 + r).collect();
                    let (chunk, next) = paged(&ids, p.get("rvcontinue"));
                    obj["revisions"] = json!(chunk.iter().map(|id| json!({"revid": id})).collect::<Vec<_>>());
                    if let Some(n) = next {
                        cont = Some(json!({"rvcontinue": n.to_string(), "continue": "||"}));
                    }
                }
                "templates" => {
                    obj["templates"] =
                        json!(page.templates.iter().map(|t| json!({"ns": 10, "title": t})).collect::<Vec<_>>());
                }
                "categories" => {
                    obj["categories"] =
                        json!(page.categories.iter().map(|c| json!({"ns": 14, "title": c})).collect::<Vec<_>>());
                }
                _ => {}
            }
        }
        query.insert("pages".into(), json!([obj]));
        let mut body = json!({"batchcomplete": true, "query": query});
        if let Some(c) = cont {
            body["continue"] = c;
        }
        ok(body)
    }

    fn pageviews(&self, path: &str) -> Result<HttpResponse, TransportFailure> {
        // .../per-article/{lang}.wikipedia/all-access/user/{title}/monthly/{start}/{end}
        let parts: Vec<&str> = path.split('/').collect();
        let n = parts.len();
        if n < 7 || parts[n - 3] != "monthly" {
            return bad("bad pageviews path");
        }
        let lang = parts[n - 7].trim_end_matches(".wikipedia");
        let title = url::form_urlencoded::parse(format!("t={}", parts[n - 4]).as_bytes())
            .next()
            .map(|(_, v)| v.replace('_', " "))
            .unwrap_or_default();
        let (start, end) = (&parts[n - 2][..6.min(parts[n - 2].len())], &parts[n - 1][..6.min(parts[n - 1].len())]);
        let Some(page) = self.wikis.get(lang).and_then(|w| w.pages.get(&title)) else {
            return Ok(HttpResponse::status(404, json!({"title": "Not found."}).to_string()));
        };
        let items: Vec<Value> = page
            .monthly_views
            .iter()
            .filter(|(m, _)| m.as_str() >= start && m.as_str() <= end)
            .map(|(m, v)| json!({"article": title, "timestamp": format!("{m}0100"), "views": v}))
            .collect();
        ok(json!({"items": items}))
    }
}

#[cfg(test)]
mod tests;
