use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::region::{resolve_region, Region, RegionTable};
use super::spec::ClassSpec;
use crate::error::{Error, Result};
use crate::http::{HttpClient, HttpRequest};
use crate::mediawiki;
use crate::par::{self, Mode};
use crate::qid::Qid;

const WD_ENTITY: &str = "http://www.wikidata.org/entity/";
const BATCH: usize = 50;

/// A typed Wikidata statement value. Lengths are normalised to kilometres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AttributeValue {
    Quantity { amount: f64, unit: String },
    Item { qid: Qid },
    Text { value: String },
    Time { value: String },
}

impl AttributeValue {
    pub fn as_km(&self) -> Option<f64> {
        match self {
            AttributeValue::Quantity { amount, unit } if unit == "km" => Some(*amount),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub qid: Qid,
    pub labels: BTreeMap<String, String>,
    /// Wikipedia page title per language; languages without a page are absent.
    pub wiki_titles: BTreeMap<String, String>,
    pub location_qids: Vec<Qid>,
    pub region: Region,
    pub attributes: BTreeMap<String, AttributeValue>,
    pub triple_count: u64,
}

impl EntityRecord {
    pub fn title(&self, lang: &str) -> Option<&str> {
        self.wiki_titles.get(lang).map(String::as_str)
    }
}

/// Converts a Wikidata quantity to SI-ish units: lengths to km, everything
/// else passed through with the unit QID (or `"1"` when unitless).
pub fn normalize_quantity(amount: f64, unit_iri: &str) -> (f64, String) {
    let unit = unit_iri.strip_prefix(WD_ENTITY).unwrap_or(unit_iri);
    match unit {
        "Q828224" => (amount, "km".into()),
        "Q11573" => (amount * 0.001, "km".into()),
        "Q253276" => (amount * 1.609_344, "km".into()),
        "Q3710" => (amount * 0.000_304_8, "km".into()),
        "Q174728" => (amount * 0.000_01, "km".into()),
        "1" | "" => (amount, "1".into()),
        other => (amount, other.to_string()),
    }
}

/// Fetches raw entity JSON for up to 50 ids per request. Missing ids are
/// left out of the result.
pub fn fetch_entities(client: &HttpClient, api: &str, ids: &[Qid], props: &str) -> Result<BTreeMap<Qid, Value>> {
    let mut out = BTreeMap::new();
    for chunk in ids.chunks(BATCH) {
        let joined = chunk.iter().map(Qid::to_string).collect::<Vec<_>>().join("|");
        let req = HttpRequest::get_query(
            api,
            &[("action", "wbgetentities"), ("ids", &joined), ("props", props), ("format", "json")],
        );
        let json = client.fetch_json(&req)?;
        let Some(entities) = json.get("entities").and_then(Value::as_object) else {
            return Err(Error::Protocol("wbgetentities response without entities".into()));
        };
        for (id, ent) in entities {
            if ent.get("missing").is_some() {
                continue;
            }
            if let Ok(q) = id.parse::<Qid>() {
                out.insert(q, ent.clone());
            }
        }
    }
    Ok(out)
}

fn best_claim<'a>(entity: &'a Value, prop: &str) -> Option<&'a Value> {
    let claims = entity.pointer(&format!("/claims/{prop}"))?.as_array()?;
    claims
        .iter()
        .find(|c| c.get("rank").and_then(Value::as_str) == Some("preferred"))
        .or_else(|| claims.iter().find(|c| c.get("rank").and_then(Value::as_str) != Some("deprecated")))
        .and_then(|c| c.pointer("/mainsnak/datavalue"))
}

fn item_values(entity: &Value, prop: &str) -> Vec<Qid> {
    let Some(claims) = entity.pointer(&format!("/claims/{prop}")).and_then(Value::as_array) else {
        return Vec::new();
    };
    let mut preferred: Vec<&Value> =
        claims.iter().filter(|c| c.get("rank").and_then(Value::as_str) == Some("preferred")).collect();
    if preferred.is_empty() {
        preferred = claims.iter().filter(|c| c.get("rank").and_then(Value::as_str) != Some("deprecated")).collect();
    }
    preferred.into_iter().filter_map(|c| c.pointer("/mainsnak/datavalue/value/id")?.as_str()?.parse().ok()).collect()
}

fn parse_datavalue(dv: &Value) -> Option<AttributeValue> {
    let value = dv.get("value")?;
    match dv.get("type")?.as_str()? {
        "quantity" => {
            let amount: f64 = value.get("amount")?.as_str()?.trim_start_matches('+').parse().ok()?;
            let unit = value.get("unit").and_then(Value::as_str).unwrap_or("1");
            let (amount, unit) = normalize_quantity(amount, unit);
            Some(AttributeValue::Quantity { amount, unit })
        }
        "wikibase-entityid" => Some(AttributeValue::Item { qid: value.get("id")?.as_str()?.parse().ok()? }),
        "string" => Some(AttributeValue::Text { value: value.as_str()?.to_string() }),
        "monolingualtext" => Some(AttributeValue::Text { value: value.get("text")?.as_str()?.to_string() }),
        "time" => Some(AttributeValue::Time { value: value.get("time")?.as_str()?.to_string() }),
        _ => None,
    }
}

fn statement_count(entity: &Value) -> u64 {
    entity
        .get("claims")
        .and_then(Value::as_object)
        .map(|m| m.values().filter_map(Value::as_array).map(|a| a.len() as u64).sum())
        .unwrap_or(0)
}

fn build_record(
    qid: Qid,
    entity: &Value,
    spec: &ClassSpec,
    hops: &BTreeMap<Qid, Value>,
    table: &RegionTable,
) -> EntityRecord {
    let mut labels = BTreeMap::new();
    let mut wiki_titles = BTreeMap::new();
    for lang in &spec.languages {
        if let Some(l) = entity.pointer(&format!("/labels/{lang}/value")).and_then(Value::as_str) {
            labels.insert(lang.clone(), l.to_string());
        }
        let site = format!("{}wiki", lang.replace('-', "_"));
        if let Some(t) = entity.pointer(&format!("/sitelinks/{site}/title")).and_then(Value::as_str) {
            if !t.trim().is_empty() {
                wiki_titles.insert(lang.clone(), t.to_string());
            }
        }
    }

    let sources: Vec<&Value> = match &spec.location_via {
        Some(via) => item_values(entity, via).iter().filter_map(|h| hops.get(h)).collect(),
        None => vec![entity],
    };
    let mut seen = BTreeSet::new();
    let mut location_qids = Vec::new();
    for src in sources {
        for prop in &spec.location_props {
            for q in item_values(src, prop) {
                if seen.insert(q) {
                    location_qids.push(q);
                }
            }
        }
    }

    let mut attributes = BTreeMap::new();
    for prop in &spec.attribute_props {
        match best_claim(entity, prop).and_then(parse_datavalue) {
            Some(v) => {
                attributes.insert(prop.clone(), v);
            }
            None => log::debug!("{qid}: no usable {prop} value"),
        }
    }

    EntityRecord {
        qid,
        region: resolve_region(&location_qids, table),
        labels,
        wiki_titles,
        location_qids,
        attributes,
        triple_count: statement_count(entity),
    }
}

/// Statements with `qid` as subject plus items linking to it (as object).
pub fn count_triples(client: &HttpClient, api: &str, qid: Qid) -> Result<u64> {
    let ent = fetch_entities(client, api, &[qid], "claims")?;
    let outgoing = ent.get(&qid).map(statement_count).unwrap_or(0);
    let incoming = mediawiki::backlinks(client, api, &qid.to_string(), None)?.len() as u64;
    Ok(outgoing + incoming)
}

pub fn enrich_entity(
    client: &HttpClient,
    api: &str,
    qid: Qid,
    spec: &ClassSpec,
    table: &RegionTable,
) -> Result<EntityRecord> {
    let mut recs = enrich_batch(client, api, &[qid], spec, table, true, Mode::Sequential, 1)?;
    recs.pop().ok_or_else(|| Error::NotFound(format!("entity {qid}")))
}

/// Enriches many entities: batched entity fetches, one hop for
/// `location_via`, then per-entity incoming-link counts with bounded
/// parallelism. Output is sorted by QID; missing entities are skipped with a
/// warning.
pub fn enrich_batch(
    client: &HttpClient,
    api: &str,
    qids: &[Qid],
    spec: &ClassSpec,
    table: &RegionTable,
    with_incoming: bool,
    mode: Mode,
    threads: usize,
) -> Result<Vec<EntityRecord>> {
    let mut ids: Vec<Qid> = qids.to_vec();
    ids.sort();
    ids.dedup();
    let entities = fetch_entities(client, api, &ids, "labels|sitelinks|claims")?;
    for q in &ids {
        if !entities.contains_key(q) {
            log::warn!("{q}: entity missing from API response");
        }
    }

    let hops = match &spec.location_via {
        Some(via) => {
            let mut hop_ids: Vec<Qid> = entities.values().flat_map(|e| item_values(e, via)).collect();
            hop_ids.sort();
            hop_ids.dedup();
            fetch_entities(client, api, &hop_ids, "claims")?
        }
        None => BTreeMap::new(),
    };

    let mut records: Vec<EntityRecord> =
        entities.iter().map(|(q, e)| build_record(*q, e, spec, &hops, table)).collect();

    if with_incoming {
        let incoming = par::bounded(mode, threads, || {
            par::try_map(mode, &records, |r| {
                mediawiki::backlinks(client, api, &r.qid.to_string(), None).map(|b| b.len() as u64)
            })
        })?;
        for (r, n) in records.iter_mut().zip(incoming) {
            r.triple_count += n;
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{HttpResponse, Transport, TransportFailure};
    use serde_json::json;
    use std::sync::Arc;

    /// A tiny Wikidata: entity JSON by id plus backlink lists.
    struct MiniWikidata {
        entities: BTreeMap<String, Value>,
        backlinks: BTreeMap<String, Vec<String>>,
    }

    impl Transport for MiniWikidata {
        fn send(&self, req: &HttpRequest) -> std::result::Result<HttpResponse, TransportFailure> {
            let url = url::Url::parse(&req.url).unwrap();
            let q: BTreeMap<String, String> = url.query_pairs().into_owned().collect();
            let body = match q.get("action").map(String::as_str) {
                Some("wbgetentities") => {
                    let mut ents = serde_json::Map::new();
                    for id in q["ids"].split('|') {
                        let e = self.entities.get(id).cloned().unwrap_or(json!({"id": id, "missing": ""}));
                        ents.insert(id.to_string(), e);
                    }
                    json!({ "entities": ents })
                }
                Some("query") => {
                    let links = self.backlinks.get(&q["bltitle"]).cloned().unwrap_or_default();
                    let items: Vec<_> = links.iter().map(|t| json!({"ns": 0, "title": t})).collect();
                    json!({"batchcomplete": true, "query": {"backlinks": items}})
                }
                _ => return Ok(HttpResponse::status(400, "bad")),
            };
            Ok(HttpResponse::ok(body.to_string()))
        }
    }

    fn item_claim(id: &str) -> Value {
        json!({"mainsnak": {"datavalue": {"type": "wikibase-entityid", "value": {"id": id}}}, "rank": "normal"})
    }

    fn world() -> MiniWikidata {
        let mut entities = BTreeMap::new();
        entities.insert(
            "Q100".into(),
            json!({
                "id": "Q100",
                "labels": {"en": {"value": "Chicago River"}},
                "sitelinks": {"enwiki": {"title": "Chicago River"}},
                "claims": {
                    "P17": [item_claim("Q30")],
                    "P2043": [{"mainsnak": {"datavalue": {"type": "quantity",
                        "value": {"amount": "+156", "unit": "http://www.wikidata.org/entity/Q253276"}}},
                        "rank": "normal"}],
                    "P31": [item_claim("Q4022")],
                    "P885": [item_claim("Q5")]
                }
            }),
        );
        entities.insert(
            "Q101".into(),
            json!({"id": "Q101", "labels": {"en": {"value": "Nameless brook"}}, "sitelinks": {}, "claims": {}}),
        );
        entities.insert(
            "Q200".into(),
            json!({"id": "Q200", "labels": {"en": {"value": "Renault Avantime"}},
                   "sitelinks": {"enwiki": {"title": "Renault Avantime"}},
                   "claims": {"P176": [item_claim("Q201")]}}),
        );
        entities.insert("Q201".into(), json!({"id": "Q201", "claims": {"P17": [item_claim("Q142")]}}));
        entities.insert(
            "Q300".into(),
            json!({"id": "Q300", "claims": {
                "P31": [item_claim("Q4022")],
                "P17": [item_claim("Q183"), item_claim("Q40")],
                "P403": [item_claim("Q1")],
                "P885": [item_claim("Q2")]
            }}),
        );
        let mut backlinks = BTreeMap::new();
        backlinks.insert("Q100".to_string(), vec!["Q1".into(), "Q2".into(), "Q3".into()]);
        MiniWikidata { entities, backlinks }
    }

    fn client() -> HttpClient {
        HttpClient::new(Arc::new(world()))
    }

    #[test]
    fn miles_normalised_to_km() {
        let rec =
            enrich_entity(&client(), "https://wd/api", Qid::new(100), &ClassSpec::rivers(), &RegionTable::shipped())
                .unwrap();
        let km = rec.attributes["P2043"].as_km().unwrap();
        assert!((km - 251.057_664).abs() < 1e-9);
        assert_eq!(rec.region, Region::Americas);
        assert_eq!(rec.title("en"), Some("Chicago River"));
    }

    #[test]
    fn no_sitelinks_means_no_titles() {
        let rec =
            enrich_entity(&client(), "https://wd/api", Qid::new(101), &ClassSpec::rivers(), &RegionTable::shipped())
                .unwrap();
        assert!(rec.wiki_titles.is_empty());
        assert_eq!(rec.region, Region::Unknown);
        assert!(rec.location_qids.is_empty());
    }

    #[test]
    fn cars_located_through_manufacturer() {
        let rec =
            enrich_entity(&client(), "https://wd/api", Qid::new(200), &ClassSpec::cars(), &RegionTable::shipped())
                .unwrap();
        assert_eq!(rec.location_qids, vec![Qid::new(142)]);
        assert_eq!(rec.region, Region::Europe);
        assert_eq!(rec.attributes["P176"], AttributeValue::Item { qid: Qid::new(201) });
    }

    #[test]
    fn missing_entity_is_not_found() {
        let err =
            enrich_entity(&client(), "https://wd/api", Qid::new(9), &ClassSpec::rivers(), &RegionTable::shipped());
        assert!(matches!(err, Err(Error::NotFound(_))));
    }

    #[test]
    fn triple_counts() {
        // 4 outgoing statements + 3 incoming links
        assert_eq!(count_triples(&client(), "https://wd/api", Qid::new(100)).unwrap(), 7);
        assert_eq!(count_triples(&client(), "https://wd/api", Qid::new(101)).unwrap(), 0);
        // subject-only: five statements, no backlinks
        assert_eq!(count_triples(&client(), "https://wd/api", Qid::new(300)).unwrap(), 5);
    }

    #[test]
    fn batch_is_sorted_and_skips_missing() {
        let recs = enrich_batch(
            &client(),
            "https://wd/api",
            &[Qid::new(200), Qid::new(9), Qid::new(100)],
            &ClassSpec::rivers(),
            &RegionTable::shipped(),
            true,
            Mode::Parallel,
            4,
        )
        .unwrap();
        let ids: Vec<_> = recs.iter().map(|r| r.qid).collect();
        assert_eq!(ids, vec![Qid::new(100), Qid::new(200)]);
    }
}
