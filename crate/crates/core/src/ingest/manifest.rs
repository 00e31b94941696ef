use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entity::{enrich_batch, EntityRecord};
use super::region::RegionTable;
use super::sparql::{build_query, run_sparql, SparqlRow};
use super::spec::ClassSpec;
use crate::error::Result;
use crate::http::HttpClient;
use crate::par::Mode;
use crate::qid::Qid;
use crate::util::{canonical_json, sha256_hex};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestEndpoints {
    pub sparql: String,
    pub wikidata_api: String,
}

impl Default for IngestEndpoints {
    fn default() -> Self {
        IngestEndpoints {
            sparql: "https://query.wikidata.org/sparql".into(),
            wikidata_api: "https://www.wikidata.org/w/api.php".into(),
        }
    }
}

/// Funnel counts: every class member, those labelled in a language, and
/// those labelled *and* with a Wikipedia page in it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub total: u64,
    pub with_label: BTreeMap<String, u64>,
    pub with_page: BTreeMap<String, u64>,
    pub enriched: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub class: String,
    pub class_qid: String,
    pub snapshot: String,
    pub endpoints: IngestEndpoints,
    pub counts: IngestCounts,
    /// SHA-256 of the raw SPARQL rows as written to `raw_rows.jsonl`.
    pub raw_checksum: String,
}

pub struct IngestOutput {
    pub raw_rows: Vec<SparqlRow>,
    pub records: Vec<EntityRecord>,
    pub manifest: IngestManifest,
}

#[derive(Default)]
struct RowSummary {
    labels: BTreeMap<String, String>,
    titles: BTreeMap<String, String>,
}

/// Runs the class query, computes the funnel and enriches every member that
/// has a Wikipedia page in at least one configured language.
#[allow(clippy::too_many_arguments)]
pub fn ingest_class(
    client: &HttpClient,
    spec: &ClassSpec,
    endpoints: &IngestEndpoints,
    table: &RegionTable,
    page_size: usize,
    snapshot: &str,
    mode: Mode,
    threads: usize,
) -> Result<IngestOutput> {
    let query = build_query(spec)?;
    let raw_rows: Vec<SparqlRow> = run_sparql(client, &query, &endpoints.sparql, page_size).collect::<Result<_>>()?;

    let mut members: BTreeMap<Qid, RowSummary> = BTreeMap::new();
    for row in &raw_rows {
        let Some(iri) = row.get("x") else { continue };
        let Ok(qid) = Qid::from_iri(iri) else {
            log::warn!("skipping non-item result {iri}");
            continue;
        };
        let entry = members.entry(qid).or_default();
        for lang in &spec.languages {
            let v = lang.replace('-', "_");
            if let Some(l) = row.get(&format!("label_{v}")) {
                entry.labels.insert(lang.clone(), l.clone());
            }
            if let Some(t) = row.get(&format!("title_{v}")).filter(|t| !t.trim().is_empty()) {
                entry.titles.insert(lang.clone(), t.clone());
            }
        }
    }

    let mut counts = IngestCounts { total: members.len() as u64, ..Default::default() };
    for lang in &spec.languages {
        let labelled = members.values().filter(|m| m.labels.contains_key(lang)).count() as u64;
        let paged =
            members.values().filter(|m| m.labels.contains_key(lang) && m.titles.contains_key(lang)).count() as u64;
        counts.with_label.insert(lang.clone(), labelled);
        counts.with_page.insert(lang.clone(), paged);
    }

    let candidates: Vec<Qid> = members.iter().filter(|(_, m)| !m.titles.is_empty()).map(|(q, _)| *q).collect();
    let records = enrich_batch(client, &endpoints.wikidata_api, &candidates, spec, table, true, mode, threads)?;
    counts.enriched = records.len() as u64;

    let mut raw_text = String::new();
    for row in &raw_rows {
        raw_text.push_str(&canonical_json(row)?);
        raw_text.push('\n');
    }
    let manifest = IngestManifest {
        class: spec.name.clone(),
        class_qid: spec.class_qid.clone(),
        snapshot: snapshot.to_string(),
        endpoints: endpoints.clone(),
        counts,
        raw_checksum: sha256_hex(raw_text),
    };
    Ok(IngestOutput { raw_rows, records, manifest })
}
