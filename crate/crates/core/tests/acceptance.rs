//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p popfact-core --test acceptance`. The online check
//! (10) only runs with `POPFACT_ONLINE=1`; it reports what it measures and
//! never gates the exit status.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use popfact_core::evidence::{strip_wikitext, EvidenceBundle, Page, PageSource};
use popfact_core::factuality::{
    evaluate_facts, extract_facts, rank_paragraphs, score_entity, Bm25Params, EvidenceConfig, FactPrompts,
    JudgeOptions, ParagraphIndex,
};
use popfact_core::http::FetchMode;
use popfact_core::ingest::{ClassSpec, Region};
use popfact_core::llm::{ChatBackend, ChatClient, ChatEndpointConfig, ChatRequest, GenerationRecord};
use popfact_core::par::Mode;
use popfact_core::pipeline::{run_all, run_stage, walk_files, Context, RunConfig, Selection, Source, Stage};
use popfact_core::popularity::{partition_tiers, RankedEntity, Tier, TierAssignment, TierBoundary};
use popfact_core::probes::{
    aggregate_errors, detect_length_km, fit_heaps, km_to_miles, lexical_tokens, miles_to_km, vocab_growth,
    DEFAULT_STRIDE,
};
use popfact_core::sampler::{filter_eligible, sample, Candidate, SamplingPlan};
use popfact_core::sim::{SimConfig, SimWorld};
use popfact_core::{Error, Qid, Result};

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1 -------------------------------------------------------------------------

fn zipf_views(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Qid, u64)> {
    let mut qids: Vec<u64> = (1..=n as u64).collect();
    qids.shuffle(rng);
    qids.into_iter()
        .enumerate()
        .map(|(r, q)| (Qid::new(q), (1e7 * ((r + 1) as f64).powf(-1.1)) as u64 + rng.random_range(0..3)))
        .collect()
}

/// Smallest prefix of the descending order whose sum reaches `num/3` of the total.
fn prefix_len(sorted: &[u64], num: u128) -> usize {
    let total: u128 = sorted.iter().map(|v| *v as u128).sum();
    let mut cum = 0u128;
    for (i, v) in sorted.iter().enumerate() {
        cum += *v as u128;
        if 3 * cum >= num * total {
            return i + 1;
        }
    }
    sorted.len()
}

fn tier_partition() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let views = zipf_views(&mut rng, 1000);
        let a = partition_tiers(&views, "views").map_err(|e| e.to_string())?;

        let mut sorted: Vec<(Qid, u64)> = views.clone();
        sorted.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        let values: Vec<u64> = sorted.iter().map(|p| p.1).collect();
        let (h, ht) = (prefix_len(&values, 1), prefix_len(&values, 2));
        ensure(a.boundary.head_size == h, || {
            format!("trial {trial}: head {} != minimal prefix {h}", a.boundary.head_size)
        })?;
        ensure(a.boundary.head_size + a.boundary.torso_size == ht, || {
            format!("trial {trial}: head+torso {} != minimal prefix {ht}", a.boundary.head_size + a.boundary.torso_size)
        })?;
        ensure(3.0 * a.boundary.head_share >= 1.0 - 1e-12 && 3.0 * a.boundary.head_torso_share >= 2.0 - 1e-12, || {
            format!("trial {trial}: shares {} / {}", a.boundary.head_share, a.boundary.head_torso_share)
        })?;
        let expected: Vec<Qid> = sorted.iter().map(|p| p.0).collect();
        ensure(a.ranking.iter().map(|r| r.qid).collect::<Vec<_>>() == expected, || format!("trial {trial}: order"))?;

        let scaled: Vec<(Qid, u64)> = views.iter().map(|(q, v)| (*q, v * 13)).collect();
        let b = partition_tiers(&scaled, "views").map_err(|e| e.to_string())?;
        ensure(a.map() == b.map(), || format!("trial {trial}: scaling changed tiers"))?;

        let mut shuffled = views.clone();
        shuffled.shuffle(&mut rng);
        let c = partition_tiers(&shuffled, "views").map_err(|e| e.to_string())?;
        ensure(a.ranking == c.ranking, || format!("trial {trial}: input order changed result"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed.as_secs_f64() < 1.0, || format!("100 trials took {elapsed:?}"))?;
    Ok(format!("100 trials in {elapsed:.0?}"))
}

// 2 -------------------------------------------------------------------------

fn quotas_for(sizes: [usize; 3]) -> std::result::Result<[usize; 3], String> {
    let mut ranking = Vec::new();
    let mut pool = Vec::new();
    let mut q = 1;
    for (tier, n) in Tier::ALL.into_iter().zip(sizes) {
        for _ in 0..n {
            ranking.push(RankedEntity { qid: Qid::new(q), value: 1, tier, rank: q as usize });
            pool.push(Candidate {
                qid: Qid::new(q),
                region: Region::ALL[q as usize % Region::ALL.len()],
                titles: BTreeMap::from([("en".to_string(), format!("River {q}"))]),
                page_length_chars: Some(1000),
                is_stub: false,
            });
            q += 1;
        }
    }
    let boundary = TierBoundary {
        head_size: sizes[0],
        torso_size: sizes[1],
        tail_size: sizes[2],
        total: ranking.len() as u128,
        head_share: 1.0 / 3.0,
        head_torso_share: 2.0 / 3.0,
    };
    let tiers = TierAssignment { metric: "views".into(), ranking, boundary };
    let plan = SamplingPlan { seed: 3, ..SamplingPlan::default() };
    let set = sample(&filter_eligible(&pool, &plan), &tiers, &plan).map_err(|e| e.to_string())?;
    let count = |t| set.entries.iter().filter(|e| e.tier == t).count();
    Ok([count(Tier::Head), count(Tier::Torso), count(Tier::Tail)])
}

fn quota_reallocation() -> Check {
    let a = quotas_for([81, 1_300, 36_000])?;
    ensure(a == [81, 200, 719], || format!("rivers-like sizes gave {a:?}"))?;
    let b = quotas_for([20, 92, 4_000])?;
    ensure(b == [20, 92, 888], || format!("short-head sizes gave {b:?}"))?;
    Ok(format!("{a:?} and {b:?}"))
}

// 3 -------------------------------------------------------------------------

/// Splits the generation into the four facts of the worked example.
struct ScriptedExtractor;

impl ChatBackend for ScriptedExtractor {
    fn complete(&self, _req: &ChatRequest) -> Result<String> {
        Ok([
            "- Tropical Storm Edouard brought gusty winds.",
            "- Tropical Storm Edouard never attained hurricane strength.",
            "- Tropical Storm Edouard brought localized flooding.",
            "- Tropical Storm Edouard brought heavy rainfall.",
        ]
        .join("\n"))
    }
}

/// Answers True exactly when the evidence it was shown contains the
/// fact's key phrase.
struct ScriptedJudge;

const KEY_PHRASES: [(&str, &str); 4] = [
    ("gusty winds", "gusty winds"),
    ("hurricane strength", "hurricane strength"),
    ("localized flooding", "localized flooding"),
    ("heavy rainfall", "heavy rainfall"),
];

impl ChatBackend for ScriptedJudge {
    fn complete(&self, req: &ChatRequest) -> Result<String> {
        let prompt = &req.messages.last().unwrap().content;
        let (evidence, fact) = prompt.rsplit_once("Input:").unwrap();
        let fact = fact.to_lowercase();
        let evidence = evidence.to_lowercase();
        let (_, phrase) = KEY_PHRASES.iter().find(|(k, _)| fact.contains(k)).unwrap();
        Ok(if evidence.contains(phrase) { "True" } else { "False" }.into())
    }
}

fn edouard_bundle() -> EvidenceBundle {
    let page = |title: &str, text: &str, source| Page::new(title, "en", text, source, 40);
    EvidenceBundle {
        qid: Qid::new(95_000_000),
        language: "en".into(),
        tier: Tier::Tail,
        entity_page: page(
            "Tropical Storm Edouard (2020)",
            "Tropical Storm Edouard was a short-lived tropical cyclone of the 2020 Atlantic season.\n\n\
             Edouard brought gusty winds to the Gulf coast before it moved inland and dissipated.",
            PageSource::EntityPage,
        ),
        search_pages: vec![page(
            "2020 Atlantic hurricane season",
            "The season was the most active on record, with thirty named storms.\n\n\
             In Texas and Louisiana, Edouard brought heavy rainfall that caused localized flooding in low-lying areas.",
            PageSource::SearchHit,
        )],
        inlink_pages: vec![page(
            "List of Gulf Coast tropical storms",
            "Several storms in this list remained weak systems over warm water.\n\n\
             Edouard never attained hurricane strength; its peak winds stayed near 45 mph.",
            PageSource::Inlink,
        )],
        collected_at: "2024-12-31".into(),
        flags: Vec::new(),
    }
}

fn edouard_worked_example() -> Check {
    let extractor = ChatClient::new(ChatEndpointConfig::mock("extract"), Arc::new(ScriptedExtractor));
    let judge = ChatClient::new(ChatEndpointConfig::mock("true"), Arc::new(ScriptedJudge));
    let generation = GenerationRecord {
        qid: Qid::new(95_000_000),
        language: "en".into(),
        template: "Tell me about the {title}.".into(),
        prompt: "Tell me about the Tropical Storm Edouard (2020).".into(),
        response: "Although it never attained hurricane strength, Edouard brought heavy rainfall, localized flooding, \
                   and gusty winds across coastal Texas and Louisiana."
            .into(),
        model: "scripted".into(),
        sentence_count: 1,
        timestamp: "2024-12-31".into(),
    };
    let prompts = FactPrompts::default();
    let topic = "Tropical Storm Edouard (2020)";
    let facts = extract_facts(&extractor, &generation, topic, &prompts).map_err(|e| e.to_string())?;
    ensure(facts.len() == 4, || format!("{} facts extracted", facts.len()))?;
    let bundle = edouard_bundle();
    let verdicts = evaluate_facts(
        &judge,
        &facts,
        &bundle,
        topic,
        &EvidenceConfig::ALL,
        &JudgeOptions::default(),
        &prompts,
        Mode::Sequential,
    )
    .map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for config in EvidenceConfig::ALL {
        let subset: Vec<_> = verdicts.iter().filter(|v| v.config == config).cloned().collect();
        let score = score_entity(&subset).ok_or_else(|| format!("no verdicts for {config}"))?;
        got.push(score.precision);
    }
    ensure(got == [0.25, 0.75, 1.0], || format!("precisions {got:?}"))?;
    Ok(format!("one-page {:.2}, +search {:.2}, +links {:.2}", got[0], got[1], got[2]))
}

// 4 -------------------------------------------------------------------------

fn oracle_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Textbook BM25 over every paragraph, sorted by score then position.
fn oracle_rank(paragraphs: &[String], query: &str, k: usize) -> Vec<(usize, f64)> {
    let docs: Vec<Vec<String>> = paragraphs.iter().map(|p| oracle_tokens(p)).collect();
    let n = docs.len() as f64;
    let avg = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
    let mut terms = oracle_tokens(query);
    terms.sort();
    terms.dedup();
    let mut scored: Vec<(usize, f64)> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut s = 0.0;
            for t in &terms {
                let tf = d.iter().filter(|w| *w == t).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                let norm = if avg > 0.0 { d.len() as f64 / avg } else { 0.0 };
                s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * norm));
            }
            (i, s)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

fn bm25_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab: Vec<String> = (0..30).map(|i| format!("term{i}")).collect();
    let mut compared = 0;
    for corpus in 0..200 {
        let n_pages = rng.random_range(1..=5);
        let mut pages = Vec::new();
        let mut flat: Vec<String> = Vec::new();
        let mut remaining = rng.random_range(1..=50usize);
        for p in 0..n_pages {
            let n = if p + 1 == n_pages { remaining } else { rng.random_range(0..=remaining) };
            remaining -= n;
            let paras: Vec<String> = (0..n)
                .map(|_| {
                    let len = rng.random_range(1..25);
                    (0..len).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ")
                })
                .collect();
            let page = Page::new(&format!("P{p}"), "en", &paras.join("\n\n"), PageSource::SearchHit, 0);
            ensure(page.paragraphs == paras, || format!("corpus {corpus}: segmentation changed paragraphs"))?;
            flat.extend(paras);
            pages.push(page);
        }
        let index = ParagraphIndex::from_pages(&pages, Bm25Params::default());
        for _ in 0..3 {
            let qlen = rng.random_range(1..=8);
            let query =
                (0..qlen).map(|_| vocab[rng.random_range(0..vocab.len())].as_str()).collect::<Vec<_>>().join(" ");
            let k = if rng.random_bool(0.5) { 5 } else { flat.len() };
            let got = rank_paragraphs(&index, &query, k);
            let want = oracle_rank(&flat, &query, k);
            ensure(got.len() == want.len(), || format!("corpus {corpus}: {} vs {} results", got.len(), want.len()))?;
            for (g, (i, s)) in got.iter().zip(&want) {
                let flat_id =
                    pages[..g.reference.page].iter().map(|p| p.paragraphs.len()).sum::<usize>() + g.reference.position;
                ensure(flat_id == *i && (g.score - s).abs() < 1e-9, || {
                    format!("corpus {corpus}, query {query:?}: got #{flat_id} {} want #{i} {s}", g.score)
                })?;
            }
            compared += 1;
        }
    }
    Ok(format!("200 corpora, {compared} queries"))
}

// 5 -------------------------------------------------------------------------

fn error_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..100 {
        let n = rng.random_range(1..=20);
        let pairs: Vec<(f64, f64)> =
            (0..n).map(|_| (rng.random_range(0.0..5000.0), rng.random_range(1.0..5000.0))).collect();
        let s = aggregate_errors(&pairs).ok_or("no summary")?;
        let mut sq = 0.0;
        let mut pct = 0.0;
        for (p, t) in &pairs {
            sq += (p - t).powi(2);
            pct += ((p - t) / t).abs();
        }
        let rmse = (sq / n as f64).sqrt();
        let mape = 100.0 * pct / n as f64;
        ensure(
            (s.rmse_km - rmse).abs() <= 1e-9 * rmse.max(1.0) && (s.mape_pct - mape).abs() <= 1e-9 * mape.max(1.0),
            || format!("trial {trial}: ({}, {}) vs ({rmse}, {mape})", s.rmse_km, s.mape_pct),
        )?;
    }
    let hand = aggregate_errors(&[(110.0, 100.0), (180.0, 200.0)]).ok_or("no summary")?;
    ensure((hand.rmse_km - 15.8114).abs() < 5e-5 && (hand.mape_pct - 10.0).abs() < 1e-12, || {
        format!("hand case RMSE {} MAPE {}", hand.rmse_km, hand.mape_pct)
    })?;
    Ok(format!("100 random vectors; hand case RMSE {:.4}, MAPE {:.1}", hand.rmse_km, hand.mape_pct))
}

// 6 -------------------------------------------------------------------------

fn unit_conversion() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let km: f64 = rng.random_range(0.001..1e5);
        let back = miles_to_km(km_to_miles(km));
        ensure(((back - km) / km).abs() < 1e-9, || format!("{km} -> {back}"))?;
    }
    let detected =
        detect_length_km("The river is 156 miles long and drains a wide basin.", "en").ok_or("no length found")?;
    ensure((detected - 251.05766).abs() < 5e-6, || format!("156 miles -> {detected} km"))?;
    Ok(format!("round trip < 1e-9; 156 miles -> {detected:.5} km"))
}

// 7 -------------------------------------------------------------------------

fn heaps() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..200 {
        let len = rng.random_range(0..400);
        let vocab = rng.random_range(1..60);
        let tokens: Vec<String> = (0..len).map(|_| format!("t{}", rng.random_range(0..vocab))).collect();
        let curve = vocab_growth(&tokens, 1);
        ensure(curve.points.len() == len, || format!("trial {trial}: {} points for {len} tokens", curve.points.len()))?;
        let mut prev = 0;
        for &(n, v) in &curve.points {
            ensure(v <= n && v >= prev && v - prev <= 1, || format!("trial {trial}: V({n}) = {v} after {prev}"))?;
            prev = v;
        }
    }
    let corpus = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/prose_corpus.txt"))
        .map_err(|e| e.to_string())?;
    let tokens = lexical_tokens(&corpus, "en");
    ensure(tokens.len() >= 50_000, || format!("corpus has {} tokens", tokens.len()))?;
    let curve = vocab_growth(&tokens, DEFAULT_STRIDE);
    let fit = fit_heaps(&curve.points).ok_or("no fit")?;
    ensure(fit.beta > 0.0 && fit.beta < 1.0, || format!("beta {}", fit.beta))?;
    Ok(format!("{} corpus tokens, beta {:.3} (R² {:.3})", tokens.len(), fit.beta, fit.r_squared))
}

// 8 -------------------------------------------------------------------------

fn wikitext_stripper() -> Check {
    for (input, want) in [
        ("plain sentence.", "plain sentence."),
        ("the [[Rio Grande|river]] flows", "the river flows"),
        ("fact{{cite web|...}} here", "fact here"),
    ] {
        let got = strip_wikitext(input);
        ensure(got == want, || format!("{input:?} -> {got:?}, want {want:?}"))?;
    }
    let world = SimWorld::generate(SimConfig { entities: 200, ..SimConfig::default() });
    let corpus: Vec<&str> = world
        .wikis
        .values()
        .flat_map(|w| w.pages.values().map(|p| p.wikitext.as_str()))
        .filter(|t| t.contains("{{") || t.contains("[["))
        .take(100)
        .collect();
    ensure(corpus.len() == 100, || format!("only {} fixture pages", corpus.len()))?;
    for (i, page) in corpus.iter().enumerate() {
        let once = strip_wikitext(page);
        let twice = strip_wikitext(&once);
        ensure(once == twice, || format!("page {i} not idempotent"))?;
        ensure(once.chars().count() <= page.chars().count(), || format!("page {i} grew"))?;
    }
    Ok("3 rewrite examples, 100 fixture pages idempotent and non-growing".into())
}

// 9 -------------------------------------------------------------------------

fn tree(root: &Path) -> std::result::Result<Vec<(String, Vec<u8>)>, String> {
    let files = walk_files(root).map_err(|e| e.to_string())?;
    files
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            std::fs::read(&p).map(|b| (rel, b)).map_err(|e| e.to_string())
        })
        .collect()
}

fn replay_config(root: &Path, out: &str, cache: &str, parallel: bool) -> RunConfig {
    let mut cfg = RunConfig {
        languages: vec!["en".into(), "zh".into()],
        source: Source::Sim(SimConfig { entities: 150, ..SimConfig::default() }),
        classes: vec![ClassSpec::rivers(), ClassSpec::disasters()],
        parallel,
        ..RunConfig::default()
    };
    cfg.plan.seed = 11;
    cfg.plan.quotas.head = 3;
    cfg.plan.quotas.torso = 6;
    cfg.plan.quotas.tail = 15;
    cfg.evidence.inlink_cap = 5;
    cfg.out_dir = root.join(out);
    cfg.cache_dir = root.join(cache);
    cfg
}

fn run(cfg: RunConfig, mode: FetchMode) -> std::result::Result<(), String> {
    let mut ctx = Context::new(cfg, mode, false, Selection::default()).map_err(|e| e.to_string())?;
    run_all(&mut ctx).map_err(|e| e.to_string())
}

fn end_to_end_replay() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    // record
    run(replay_config(root, "a", "cache", true), FetchMode::Live)?;
    let a = tree(&root.join("a"))?;
    // replay from the recorded responses only
    run(replay_config(root, "b", "cache", true), FetchMode::Replay)?;
    ensure(a == tree(&root.join("b"))?, || "replayed tree differs from the recorded run".into())?;
    // independent run with its own cache, sequential this time
    run(replay_config(root, "c", "cache2", false), FetchMode::Live)?;
    ensure(a == tree(&root.join("c"))?, || "fresh sequential run differs".into())?;
    // a replay miss is a hard error
    let mut cfg = replay_config(root, "d", "empty-cache", true);
    cfg.plan.seed = 12;
    let mut ctx = Context::new(cfg, FetchMode::Replay, false, Selection::default()).map_err(|e| e.to_string())?;
    let miss = run_stage(&mut ctx, Stage::Ingest);
    ensure(matches!(miss, Err(Error::ReplayMiss(_))), || format!("replay without a cache gave {miss:?}"))?;
    let facts = a.iter().filter(|(p, _)| p.ends_with("facts.jsonl")).map(|(_, b)| b.len()).sum::<usize>();
    ensure(facts > 0, || "no facts were evaluated".into())?;
    Ok(format!("{} files identical across record, replay and a sequential rerun", a.len()))
}

// 10 ------------------------------------------------------------------------

fn online_head_sizes() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig {
        languages: vec!["en".into()],
        classes: vec![ClassSpec::rivers(), ClassSpec::cars()],
        ..RunConfig::default()
    };
    for c in &mut cfg.classes {
        c.languages = vec!["en".into()];
    }
    cfg.out_dir = dir.path().join("out");
    cfg.cache_dir = std::env::var("POPFACT_CACHE").map_or(dir.path().join("cache"), Into::into);
    let mut ctx = Context::new(cfg, FetchMode::Live, false, Selection::default()).map_err(|e| e.to_string())?;
    for stage in [Stage::Ingest, Stage::Stats, Stage::Tier] {
        run_stage(&mut ctx, stage).map_err(|e| e.to_string())?;
    }
    let mut report = Vec::new();
    for (class, reference) in [("rivers", 81), ("cars", 267)] {
        let b: HashMap<String, serde_json::Value> =
            popfact_core::util::read_json(&ctx.stage_dir(Some(class), Stage::Tier).join("boundary.json"))
                .map_err(|e| e.to_string())?;
        let head = b["head_size"].as_u64().unwrap_or(0);
        report.push(format!("{class} head {head} (reference {reference}, divergence {:+})", head as i64 - reference));
    }
    Ok(report.join("; "))
}

fn main() {
    let checks: [(&str, fn() -> Check); 9] = [
        ("tier partition properties", tier_partition),
        ("quota reallocation", quota_reallocation),
        ("evidence configuration worked example", edouard_worked_example),
        ("BM25 oracle equivalence", bm25_oracle),
        ("RMSE/MAPE oracle", error_metrics),
        ("unit conversion", unit_conversion),
        ("Heaps invariants", heaps),
        ("wikitext stripper", wikitext_stripper),
        ("end-to-end replay determinism", end_to_end_replay),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if std::env::var("POPFACT_ONLINE").as_deref() == Ok("1") {
        match online_head_sizes() {
            Ok(detail) => println!("PASS 10 live head sizes (reported, not asserted): {detail}"),
            Err(why) => println!("FAIL 10 live head sizes (not gating): {why}"),
        }
    } else {
        println!("SKIP 10 live head sizes: set POPFACT_ONLINE=1 to query Wikimedia");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
