use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::text;
use crate::ingest::{Region, RegionTable};
use crate::qid::Qid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub entities: usize,
    pub class_qid: String,
    pub year: i32,
    pub zipf_exponent: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { seed: 2024, entities: 400, class_qid: "Q4022".into(), year: 2024, zipf_exponent: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimItem {
    pub qid: Qid,
    pub labels: BTreeMap<String, String>,
    pub sitelinks: BTreeMap<String, String>,
    pub claims: BTreeMap<String, Vec<Value>>,
    /// Titles of Wikidata items linking here.
    pub incoming: Vec<String>,
}

impl SimItem {
    fn new(qid: Qid) -> Self {
        SimItem {
            qid,
            labels: BTreeMap::new(),
            sitelinks: BTreeMap::new(),
            claims: BTreeMap::new(),
            incoming: Vec::new(),
        }
    }

    /// `wbgetentities` JSON restricted to the requested `props`.
    pub fn to_json(&self, props: &str) -> Value {
        let mut v = json!({"type": "item", "id": self.qid.to_string()});
        for prop in props.split('|') {
            match prop {
                "labels" => {
                    v["labels"] = self
                        .labels
                        .iter()
                        .map(|(l, s)| (l.clone(), json!({"language": l, "value": s})))
                        .collect::<serde_json::Map<_, _>>()
                        .into();
                }
                "sitelinks" => {
                    v["sitelinks"] = self
                        .sitelinks
                        .iter()
                        .map(|(l, t)| (format!("{l}wiki"), json!({"site": format!("{l}wiki"), "title": t})))
                        .collect::<serde_json::Map<_, _>>()
                        .into();
                }
                "claims" => v["claims"] = json!(self.claims),
                _ => {}
            }
        }
        v
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimPage {
    pub pageid: u64,
    pub extract: Option<String>,
    pub wikitext: String,
    pub templates: Vec<String>,
    pub categories: Vec<String>,
    pub revisions: u64,
    /// `YYYYMM` to user views.
    pub monthly_views: BTreeMap<String, u64>,
    pub backlinks: Vec<String>,
    title_tokens: BTreeSet<String>,
    text_tokens: BTreeSet<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimWiki {
    pub pages: BTreeMap<String, SimPage>,
    pub redirects: BTreeMap<String, String>,
}

fn search_tokens(s: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for word in s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()) {
        let lower = word.to_lowercase();
        if lower.chars().any(crate::factuality::is_cjk) {
            out.extend(lower.chars().map(String::from));
        } else {
            out.insert(lower);
        }
    }
    out
}

impl SimWiki {
    /// Titles ranked by title-token overlap, then body overlap.
    pub fn search(&self, query: &str, limit: usize) -> Vec<String> {
        let q = search_tokens(query);
        let mut scored: Vec<(usize, &String)> = self
            .pages
            .iter()
            .map(|(t, p)| {
                let title_hits = q.intersection(&p.title_tokens).count();
                let text_hits = q.intersection(&p.text_tokens).count();
                (3 * title_hits + text_hits.min(3), t)
            })
            .filter(|(s, _)| *s > 0)
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
        scored.into_iter().take(limit).map(|(_, t)| t.clone()).collect()
    }

    fn add(&mut self, title: &str, mut page: SimPage) {
        page.pageid = self.pages.len() as u64 + 1;
        page.title_tokens = search_tokens(title);
        page.text_tokens = search_tokens(page.extract.as_deref().unwrap_or(&page.wikitext));
        self.pages.insert(title.to_string(), page);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimWorld {
    pub config: SimConfig,
    pub class_qid: String,
    pub items: BTreeMap<Qid, SimItem>,
    pub wikis: BTreeMap<String, SimWiki>,
    /// Length the wiki prose states, which is the true value.
    pub true_length_km: BTreeMap<Qid, f64>,
    member_ids: Vec<Qid>,
}

struct Country {
    qid: Qid,
    region: Region,
    en: String,
    zh: String,
}

fn item_claim(id: &str) -> Value {
    json!({"mainsnak": {"snaktype": "value", "datavalue": {"type": "wikibase-entityid", "value": {"entity-type": "item", "id": id}}}, "rank": "normal"})
}

fn quantity_claim(amount: f64, unit: &str) -> Value {
    json!({"mainsnak": {"snaktype": "value", "datavalue": {"type": "quantity",
        "value": {"amount": format!("+{amount}"), "unit": format!("http://www.wikidata.org/entity/{unit}")}}}, "rank": "normal"})
}

fn split_months(rng: &mut ChaCha8Rng, year: i32, total: u64) -> BTreeMap<String, u64> {
    let weights: Vec<f64> = (0..12).map(|_| rng.random_range(0.7..1.3)).collect();
    let sum: f64 = weights.iter().sum();
    let mut out = BTreeMap::new();
    let mut used = 0u64;
    for (m, w) in weights.iter().enumerate() {
        let v = if m == 11 { total - used } else { ((total as f64) * w / sum).floor() as u64 };
        used += v;
        out.insert(format!("{year:04}{:02}", m + 1), v);
    }
    out
}

enum Kind {
    Normal,
    Stub,
    Short,
    SourceOnly,
}

impl SimWorld {
    pub fn generate(config: SimConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut items: BTreeMap<Qid, SimItem> = BTreeMap::new();
        let mut wikis: BTreeMap<String, SimWiki> =
            ["en", "zh"].iter().map(|l| (l.to_string(), SimWiki::default())).collect();

        let table = RegionTable::shipped();
        let mut countries: Vec<Country> = Vec::new();
        for region in Region::ALL {
            let qids: Vec<Qid> = table.iter().filter(|(_, r)| *r == region).map(|(q, _)| q).take(4).collect();
            for qid in qids {
                let en = format!("{}ia", text::name(&mut rng));
                let zh = format!("{}国", text::zh_name(&mut rng));
                let mut item = SimItem::new(qid);
                item.labels.insert("en".into(), en.clone());
                item.labels.insert("zh".into(), zh.clone());
                items.insert(qid, item);
                countries.push(Country { qid, region, en, zh });
            }
        }

        // class members
        struct Member {
            qid: Qid,
            country: Option<usize>,
            en: Option<String>,
            zh: Option<String>,
            km: f64,
        }
        let mut members: Vec<Member> = Vec::new();
        let mut bases: Vec<(String, String)> = Vec::new();
        let mut taken: BTreeSet<String> = BTreeSet::new();
        for i in 0..config.entities {
            let qid = Qid::new(5_000_000 + 3 * i as u64);
            let roll = rng.random_range(0..100);
            let region = match roll {
                0..12 => Region::Africa,
                12..36 => Region::Americas,
                36..60 => Region::Aao,
                60..90 => Region::Europe,
                _ => Region::Unknown,
            };
            let country = (region != Region::Unknown).then(|| {
                let idx: Vec<usize> = (0..countries.len()).filter(|c| countries[*c].region == region).collect();
                *idx.choose(&mut rng).expect("every region has countries")
            });
            let (base, zh_base) = if i > 10 && rng.random_bool(0.08) {
                bases[rng.random_range(0..bases.len())].clone()
            } else {
                (text::name(&mut rng), text::zh_name(&mut rng))
            };
            bases.push((base.clone(), zh_base.clone()));
            let where_en = country.map_or("transboundary".to_string(), |c| countries[c].en.clone());
            let where_zh = country.map_or("跨境".to_string(), |c| countries[c].zh.clone());
            let mut en_title = format!("{base} River");
            if !taken.insert(en_title.clone()) {
                en_title = format!("{base} River ({where_en})");
                if !taken.insert(en_title.clone()) {
                    en_title = format!("{base} River ({where_en} {i})");
                    taken.insert(en_title.clone());
                }
            }
            let mut zh_title = format!("{zh_base}河");
            if !taken.insert(zh_title.clone()) {
                zh_title = format!("{zh_base}河（{where_zh}）");
                if !taken.insert(zh_title.clone()) {
                    zh_title = format!("{zh_base}河（{where_zh}{i}）");
                    taken.insert(zh_title.clone());
                }
            }
            let has_en = rng.random_bool(0.93);
            let has_zh = rng.random_bool(0.45);
            let km = (rng.random_range(5f64.ln()..4000f64.ln())).exp();
            members.push(Member {
                qid,
                country,
                en: has_en.then_some(en_title),
                zh: has_zh.then_some(zh_title),
                km: (km * 10.0).round() / 10.0,
            });
        }

        // popularity: Zipf over a random order
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(&mut rng);
        let mut yearly = vec![0u64; members.len()];
        for (rank, idx) in order.iter().enumerate() {
            yearly[*idx] = (8.0e6 / ((rank + 1) as f64).powf(config.zipf_exponent)).floor() as u64;
        }

        let mut true_length_km = BTreeMap::new();
        let mut backlinks: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
        let mut lists: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
        for (i, m) in members.iter().enumerate() {
            let mut item = SimItem::new(m.qid);
            item.claims.insert("P31".into(), vec![item_claim(&config.class_qid)]);
            if let Some(c) = m.country {
                item.claims.insert("P17".into(), vec![item_claim(&countries[c].qid.to_string())]);
            }
            true_length_km.insert(m.qid, m.km);
            match rng.random_range(0..100) {
                // a Wikidata value off by a unit slip, as with the Chicago River
                _ if i == 5 => {
                    item.claims.insert(
                        "P2043".into(),
                        vec![quantity_claim(((m.km / 100.0) * 10.0).round() / 10.0, "Q253276")],
                    );
                }
                0..78 => {
                    item.claims.insert("P2043".into(), vec![quantity_claim(m.km, "Q828224")]);
                }
                78..93 => {
                    let miles = ((m.km / 1.609_344) * 100.0).round() / 100.0;
                    item.claims.insert("P2043".into(), vec![quantity_claim(miles, "Q253276")]);
                }
                _ => {}
            }
            let popularity = (yearly[i] as f64).log10().max(0.0);
            let extra = (popularity as usize).saturating_sub(1);
            if extra > 0 {
                item.claims
                    .insert("P1343".into(), (0..extra).map(|k| item_claim(&format!("Q{}", 7_000_000 + k))).collect());
            }
            let incoming = rng.random_range(0..=(2 + 2 * extra));
            item.incoming = (0..incoming).map(|k| format!("Q{}", 9_000_000 + 10 * i + k)).collect();
            if let Some(l) = &m.en {
                item.labels.insert("en".into(), l.clone());
            } else {
                item.labels.insert("en".into(), bases[i].0.clone() + " River");
            }
            if m.zh.is_some() || rng.random_bool(0.2) {
                item.labels.insert("zh".into(), format!("{}河", bases[i].1));
            }
            let mouth = members[rng.random_range(0..members.len())].qid;
            if mouth != m.qid {
                item.claims.insert("P403".into(), vec![item_claim(&mouth.to_string())]);
            }

            let kind = match rng.random_range(0..100) {
                0..7 => Kind::Stub,
                7..12 => Kind::Short,
                12..22 => Kind::SourceOnly,
                _ => Kind::Normal,
            };
            let depth = 1 + (popularity as usize).min(6);
            let trib = members.get(rng.random_range(0..members.len())).filter(|t| t.qid != m.qid);

            if let Some(title) = &m.en {
                item.sitelinks.insert("en".into(), title.clone());
                let where_en = m.country.map(|c| countries[c].en.as_str());
                let other = trib.and_then(|t| t.en.clone()).unwrap_or_else(|| "Sea".to_string());
                let lead = match &kind {
                    Kind::Short => format!("The {title} is a river."),
                    _ => format!(
                        "The {title} is a river{}. It is {} km ({} mi) long and flows into the {other}.",
                        where_en.map_or(" that crosses several countries".to_string(), |w| format!(" in {w}")),
                        text::km_text(m.km),
                        text::km_text(m.km / 1.609_344),
                    ),
                };
                let body: Vec<String> = match kind {
                    Kind::Normal | Kind::SourceOnly => (0..depth)
                        .map(|_| {
                            let n = rng.random_range(2..6);
                            text::paragraph(&mut rng, n, title, &other)
                        })
                        .collect(),
                    Kind::Stub => vec![text::filler_sentence(&mut rng, title, &other)],
                    Kind::Short => Vec::new(),
                };
                if let Some(t) = trib.and_then(|t| t.en.clone()) {
                    backlinks.entry(("en".into(), t)).or_default().push(title.clone());
                }
                let list = format!("List of rivers of {}", where_en.unwrap_or("the world"));
                lists.entry(("en".into(), list)).or_default().push(title.clone());

                let stub = matches!(kind, Kind::Stub);
                let mut extract = lead.clone();
                if !body.is_empty() {
                    extract.push_str("\n\n\nCourse\n");
                    extract.push_str(&body.join("\n"));
                }
                let mut wikitext = format!(
                    "{{{{Infobox river\n| name = {title}\n| length = {{{{convert|{}|km|mi}}}}\n}}}}\n'''{title}''' is a river{}.<ref>{{{{cite web |title=Rivers of the world |url=https://example.org}}}}</ref>",
                    text::km_text(m.km).replace(',', ""),
                    where_en.map_or(String::new(), |w| format!(" in [[{w}]]")),
                );
                if !matches!(kind, Kind::Short) {
                    wikitext.push_str(&format!(
                        " It is {} km ({} mi) long and flows into the [[{other}]].",
                        text::km_text(m.km),
                        text::km_text(m.km / 1.609_344)
                    ));
                }
                if !body.is_empty() {
                    wikitext.push_str("\n\n== Course ==\n");
                    wikitext.push_str(&body.join("\n\n"));
                }
                wikitext.push_str("\n\n== References ==\n{{reflist}}\n");
                if stub {
                    wikitext.push_str("\n{{River-stub}}\n");
                }
                wikitext.push_str(&format!("\n[[Category:Rivers of {}]]", where_en.unwrap_or("the world")));
                let mut templates =
                    vec!["Template:Infobox river".to_string(), "Template:Cite web".into(), "Template:Reflist".into()];
                let mut categories = vec![format!("Category:Rivers of {}", where_en.unwrap_or("the world"))];
                if stub {
                    templates.push("Template:River-stub".into());
                    categories.push("Category:River stubs".into());
                }
                let revisions = 1 + ((yearly[i] as f64).powf(0.45) / 3.0) as u64 + rng.random_range(0..20);
                let page = SimPage {
                    extract: (!matches!(kind, Kind::SourceOnly)).then_some(extract),
                    wikitext,
                    templates,
                    categories,
                    revisions: revisions.min(1400),
                    monthly_views: split_months(&mut rng, config.year, yearly[i]),
                    ..Default::default()
                };
                wikis.get_mut("en").unwrap().add(title, page);
                if rng.random_bool(0.1) && !taken.contains(&format!("River {}", bases[i].0)) {
                    let alias = format!("River {}", bases[i].0);
                    taken.insert(alias.clone());
                    wikis.get_mut("en").unwrap().redirects.insert(alias, title.clone());
                }
            }

            if let Some(title) = &m.zh {
                item.sitelinks.insert("zh".into(), title.clone());
                let where_zh = m.country.map_or("多个国家".to_string(), |c| countries[c].zh.clone());
                let lead = format!("{title}是位于{where_zh}的一条河流，全长{}公里。", text::km_text(m.km));
                let n = if matches!(kind, Kind::Stub | Kind::Short) { 0 } else { depth };
                let body: Vec<String> = (0..n)
                    .map(|_| {
                        let k = rng.random_range(2..5);
                        (0..k).map(|_| text::zh_filler_sentence(&mut rng, title)).collect::<String>()
                    })
                    .collect();
                if let Some(t) = trib.and_then(|t| t.zh.clone()) {
                    backlinks.entry(("zh".into(), t)).or_default().push(title.clone());
                }
                let list = format!("{where_zh}河流列表");
                lists.entry(("zh".into(), list)).or_default().push(title.clone());
                let stub = matches!(kind, Kind::Stub | Kind::Short);
                let mut wikitext =
                    format!("'''{title}'''是位于[[{where_zh}]]的一条河流，全长{}公里。", text::km_text(m.km));
                for b in &body {
                    wikitext.push_str("\n\n");
                    wikitext.push_str(b);
                }
                if stub {
                    wikitext.push_str("\n\n{{河流小作品}}");
                }
                let mut extract = lead;
                for b in &body {
                    extract.push('\n');
                    extract.push_str(b);
                }
                let zh_views = match m.en {
                    Some(_) => (yearly[i] as f64 * rng.random_range(0.01..0.3)) as u64,
                    None => rng.random_range(0..5_000),
                };
                let page = SimPage {
                    extract: Some(extract),
                    wikitext,
                    templates: if stub { vec!["Template:河流小作品".into()] } else { Vec::new() },
                    categories: if stub { vec!["Category:河流小作品".into()] } else { Vec::new() },
                    revisions: 1 + rng.random_range(0..60),
                    monthly_views: split_months(&mut rng, config.year, zh_views),
                    ..Default::default()
                };
                wikis.get_mut("zh").unwrap().add(title, page);
            }
            items.insert(m.qid, item);
        }

        for ((lang, list_title), entries) in &lists {
            let mut extract = if lang == "zh" {
                format!("本条目列出{}。", list_title)
            } else {
                format!("This is a {}.", list_title.to_lowercase())
            };
            for t in entries {
                let km =
                    members.iter().find(|m| m.en.as_ref() == Some(t) || m.zh.as_ref() == Some(t)).map_or(0.0, |m| m.km);
                extract.push('\n');
                if lang == "zh" {
                    extract.push_str(&format!("{t}，长{}公里。", text::km_text(km)));
                } else {
                    extract.push_str(&format!("The {t} is {} km long.", text::km_text(km)));
                }
                backlinks.entry((lang.clone(), t.clone())).or_default().push(list_title.clone());
            }
            let wikitext = extract.lines().map(|l| format!("* {l}")).collect::<Vec<_>>().join("\n");
            let list_views = rng.random_range(100..20_000);
            let page = SimPage {
                extract: Some(extract),
                wikitext,
                revisions: 1 + rng.random_range(0..200),
                monthly_views: split_months(&mut rng, config.year, list_views),
                ..Default::default()
            };
            wikis.get_mut(lang).unwrap().add(list_title, page);
        }
        for ((lang, title), mut links) in backlinks {
            links.sort();
            links.dedup();
            if let Some(p) = wikis.get_mut(&lang).unwrap().pages.get_mut(&title) {
                p.backlinks = links;
            }
        }

        let member_ids = members.iter().map(|m| m.qid).collect();
        SimWorld { class_qid: config.class_qid.clone(), config, items, wikis, true_length_km, member_ids }
    }

    /// Class members in the order the SPARQL endpoint returns them.
    pub fn members(&self) -> Vec<&SimItem> {
        self.member_ids.iter().filter_map(|q| self.items.get(q)).collect()
    }
}
