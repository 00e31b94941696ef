use std::sync::Arc;

use super::*;
use crate::http::HttpClient;
use crate::ingest::{ingest_class, ClassSpec, RegionTable};
use crate::par::Mode;
use crate::qid::Qid;
use crate::wikistats::{collect_profiles, PageviewWindow};

fn small() -> SimWorld {
    SimWorld::generate(SimConfig { entities: 60, ..Default::default() })
}

#[test]
fn generation_is_deterministic() {
    assert_eq!(small(), small());
    let other = SimWorld::generate(SimConfig { entities: 60, seed: 7, ..Default::default() });
    assert_ne!(small().items, other.items);
}

#[test]
fn ingest_and_signals_round_trip() {
    let world = small();
    let client = HttpClient::new(Arc::new(world.clone()));
    let spec = ClassSpec::rivers();
    let out =
        ingest_class(&client, &spec, &ingest_endpoints(), &RegionTable::shipped(), 25, "sim", Mode::Sequential, 1)
            .unwrap();
    assert_eq!(out.manifest.counts.total, 60);
    let with_page = world.members().iter().filter(|m| !m.sitelinks.is_empty()).count();
    assert_eq!(out.records.len(), with_page);

    let langs = vec!["en".to_string(), "zh".to_string()];
    let profiles = collect_profiles(
        &client,
        &wiki_endpoints(),
        &out.records,
        &langs,
        &PageviewWindow::calendar_year(2024),
        Mode::Parallel,
        4,
    )
    .unwrap();
    for (rec, prof) in out.records.iter().zip(&profiles) {
        for (lang, s) in &prof.signals {
            let page = &world.wikis[lang].pages[&rec.wiki_titles[lang]];
            assert_eq!(s.pageviews, page.monthly_views.values().sum::<u64>());
            assert_eq!(s.inlinks, page.backlinks.len() as u64);
            assert_eq!(s.edits, page.revisions);
        }
    }
}

#[test]
fn unit_slip_item_disagrees_with_prose() {
    let world = small();
    let item = world.members()[5];
    let claim = &item.claims["P2043"][0];
    assert!(claim.pointer("/mainsnak/datavalue/value/unit").unwrap().as_str().unwrap().ends_with("Q253276"));
    let wd_miles: f64 = claim.pointer("/mainsnak/datavalue/value/amount").unwrap().as_str().unwrap().parse().unwrap();
    let truth = world.true_length_km[&item.qid];
    assert!((wd_miles * 1.609_344 - truth).abs() > 0.1 * truth);
}

#[test]
fn search_prefers_title_matches() {
    let world = small();
    let title = world.members().iter().find_map(|m| m.sitelinks.get("en").cloned()).unwrap();
    let hits = world.wikis["en"].search(&title, 10);
    assert!(hits.len() <= 10);
    assert_eq!(hits.first(), Some(&title));
}

#[test]
fn unknown_routes() {
    let world = small();
    let client = HttpClient::new(Arc::new(world));
    let missing = crate::http::HttpRequest::get(format!(
        "{PAGEVIEWS_URL}/en.wikipedia/all-access/user/Nowhere_River/monthly/2024010100/2024123100"
    ));
    assert!(matches!(client.fetch_json(&missing), Err(crate::Error::NotFound(_))));
    let q = crate::ingest::fetch_entities(&client, WIKIDATA_API, &[Qid::new(1)], "labels").unwrap();
    assert!(q.is_empty());
}
