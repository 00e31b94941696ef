use std::collections::BTreeMap;

use serde::Deserialize;

use super::spec::ClassSpec;
use crate::error::{Error, Result};
use crate::http::{HttpClient, HttpRequest};

pub const DEFAULT_PAGE_SIZE: usize = 10_000;

/// One result row: variable name to lexical value.
pub type SparqlRow = BTreeMap<String, String>;

/// A class query with `{limit}`/`{offset}` placeholders still open.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparqlQuery {
    template: String,
}

impl SparqlQuery {
    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn page(&self, limit: usize, offset: usize) -> String {
        self.template.replace("{limit}", &limit.to_string()).replace("{offset}", &offset.to_string())
    }
}

pub fn build_query(spec: &ClassSpec) -> Result<SparqlQuery> {
    spec.validate()?;
    let mut vars = String::new();
    let mut optionals = String::new();
    for lang in &spec.languages {
        let v = lang.replace('-', "_");
        vars.push_str(&format!(" ?label_{v} ?title_{v}"));
        optionals
            .push_str(&format!("  OPTIONAL {{ ?x rdfs:label ?label_{v} . FILTER(LANG(?label_{v}) = \"{lang}\") }}\n"));
        optionals.push_str(&format!(
            "  OPTIONAL {{ ?page_{v} schema:about ?x ; schema:isPartOf <https://{lang}.wikipedia.org/> ; schema:name ?title_{v} . }}\n"
        ));
    }
    let template = spec
        .sparql_template
        .replace("{membership}", &spec.membership)
        .replace("{class}", &spec.class_qid)
        .replace("{vars}", &vars)
        .replace("{optionals}", &optionals);
    Ok(SparqlQuery { template })
}

#[derive(Deserialize)]
struct SparqlJson {
    results: SparqlResults,
}

#[derive(Deserialize)]
struct SparqlResults {
    bindings: Vec<BTreeMap<String, SparqlTerm>>,
}

#[derive(Deserialize)]
struct SparqlTerm {
    value: String,
}

/// Pages through a query until a short page comes back.
pub struct SparqlRows<'a> {
    client: &'a HttpClient,
    endpoint: String,
    query: SparqlQuery,
    page_size: usize,
    offset: usize,
    buffer: std::vec::IntoIter<SparqlRow>,
    done: bool,
}

impl SparqlRows<'_> {
    fn next_page(&mut self) -> Result<Vec<SparqlRow>> {
        let text = self.query.page(self.page_size, self.offset);
        let req = HttpRequest::post_form(&self.endpoint, &[("query", &text), ("format", "json")]);
        let json = match self.client.fetch_json(&req) {
            Err(Error::Timeout { url }) => {
                return Err(Error::Transport {
                    url,
                    message: format!(
                        "query timed out at offset {}; lower the page size (currently {})",
                        self.offset, self.page_size
                    ),
                    attempts: vec!["timeout".into()],
                })
            }
            other => other?,
        };
        let parsed: SparqlJson =
            serde_json::from_value(json).map_err(|e| Error::Protocol(format!("malformed SPARQL results: {e}")))?;
        Ok(parsed.results.bindings.into_iter().map(|b| b.into_iter().map(|(k, t)| (k, t.value)).collect()).collect())
    }
}

impl Iterator for SparqlRows<'_> {
    type Item = Result<SparqlRow>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(row) = self.buffer.next() {
                return Some(Ok(row));
            }
            if self.done {
                return None;
            }
            match self.next_page() {
                Ok(rows) => {
                    if rows.len() < self.page_size {
                        self.done = true;
                    }
                    self.offset += rows.len();
                    self.buffer = rows.into_iter();
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

pub fn run_sparql<'a>(client: &'a HttpClient, query: &SparqlQuery, endpoint: &str, page_size: usize) -> SparqlRows<'a> {
    SparqlRows {
        client,
        endpoint: endpoint.to_string(),
        query: query.clone(),
        page_size: page_size.max(1),
        offset: 0,
        buffer: Vec::new().into_iter(),
        done: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{HttpResponse, RetryPolicy, Transport, TransportFailure};
    use regex::Regex;
    use std::sync::Arc;

    #[test]
    fn rivers_query_has_membership_triple() {
        let q = build_query(&ClassSpec::rivers()).unwrap();
        assert!(q.template().contains("?x wdt:P31 wd:Q4022"));
        assert!(q.template().contains("ORDER BY ?x"));
        assert!(q.page(10, 20).contains("LIMIT 10\nOFFSET 20"));
    }

    #[test]
    fn substitutes_class() {
        let q = build_query(&ClassSpec::disasters()).unwrap();
        assert!(q.template().contains("wd:Q8065"));
    }

    #[test]
    fn malformed_qid_rejected() {
        let mut s = ClassSpec::rivers();
        s.class_qid = "4022".into();
        assert!(matches!(build_query(&s), Err(Error::Validation(_))));
    }

    /// Serves a fixed list of entity IRIs sliced by LIMIT/OFFSET.
    struct Pages {
        iris: Vec<String>,
        fail_status: Option<u16>,
    }

    impl Transport for Pages {
        fn send(&self, req: &HttpRequest) -> std::result::Result<HttpResponse, TransportFailure> {
            if let Some(s) = self.fail_status {
                return Ok(HttpResponse::status(s, "boom"));
            }
            let body: String = url::form_urlencoded::parse(req.body.as_deref().unwrap().as_bytes())
                .find(|(k, _)| k == "query")
                .map(|(_, v)| v.into_owned())
                .unwrap();
            let lim: usize = Regex::new(r"LIMIT (\d+)").unwrap().captures(&body).unwrap()[1].parse().unwrap();
            let off: usize = Regex::new(r"OFFSET (\d+)").unwrap().captures(&body).unwrap()[1].parse().unwrap();
            let rows: Vec<_> = self
                .iris
                .iter()
                .skip(off)
                .take(lim)
                .map(|i| serde_json::json!({"x": {"type": "uri", "value": i}}))
                .collect();
            Ok(HttpResponse::ok(
                serde_json::json!({"head": {"vars": ["x"]}, "results": {"bindings": rows}}).to_string(),
            ))
        }
    }

    fn iris(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("http://www.wikidata.org/entity/Q{i}")).collect()
    }

    #[test]
    fn three_pages_of_two() {
        let t = Arc::new(Pages { iris: iris(6), fail_status: None });
        let client = HttpClient::new(t);
        let q = build_query(&ClassSpec::rivers()).unwrap();
        let rows: Vec<_> = run_sparql(&client, &q, "https://q.example/sparql", 2).collect::<Result<_>>().unwrap();
        let got: Vec<_> = rows.iter().map(|r| r["x"].clone()).collect();
        assert_eq!(got, iris(6));
        // 3 full pages plus the empty terminating page
        assert_eq!(client.network_calls(), 4);
    }

    #[test]
    fn empty_result_set() {
        let client = HttpClient::new(Arc::new(Pages { iris: vec![], fail_status: None }));
        let q = build_query(&ClassSpec::rivers()).unwrap();
        let rows: Vec<_> = run_sparql(&client, &q, "https://q.example/sparql", 100).collect();
        assert!(rows.is_empty());
    }

    #[test]
    fn server_errors_exhaust_retries() {
        let client = HttpClient::new(Arc::new(Pages { iris: vec![], fail_status: Some(500) }))
            .with_retry(RetryPolicy { max_attempts: 3, base_delay_ms: 1 });
        let q = build_query(&ClassSpec::rivers()).unwrap();
        let first = run_sparql(&client, &q, "https://q.example/sparql", 100).next().unwrap();
        assert!(matches!(first, Err(Error::Transport { .. })));
        assert_eq!(client.network_calls(), 3);
    }
}
