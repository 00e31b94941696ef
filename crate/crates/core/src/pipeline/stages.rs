use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Context, RunManifest, Stage, StageRun};
use crate::error::{Error, Result};
use crate::evidence::{collect_bundles, read_dataset, write_dataset, Dataset};
use crate::factuality::{
    aggregate, evaluate_facts, extract_facts, score_entity, AtomicFact, EntityPrecision, EvidenceConfig, Verdict,
};
use crate::ingest::{ingest_class, ClassSpec, EntityRecord, RegionTable};
use crate::llm::{generate_all, generation_stats, GenerationOutcome, GenerationRecord};
use crate::par;
use crate::popularity::{correlation_matrix, partition_tiers, profile_metrics, Tier, TierAssignment};
use crate::probes::{
    checks_csv, detect_length_km, fit_heaps, lexical_tokens, read_corrections, render_svg, summarize_checks,
    summary_markdown, vocab_growth, AttributeCheck, HeapsCurve, Series,
};
use crate::qid::Qid;
use crate::sampler::{annotate_ambiguity, filter_eligible, sample as draw_sample, Candidate, SampleSet};
use crate::util::{read_json, read_jsonl, write_atomic, write_json_pretty, write_jsonl};
use crate::wikistats::{collect_profiles, PopularityProfile};

/// Wikidata property holding a river's length.
const LENGTH_PROPERTY: &str = "P2043";

/// One generator's outcome for an (entity, language) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub model: String,
    pub outcome: GenerationOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactRecord {
    pub model: String,
    #[serde(flatten)]
    pub fact: AtomicFact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub model: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

fn file(ctx: &Context, class: &ClassSpec, stage: Stage, name: &str) -> PathBuf {
    ctx.stage_dir(Some(&class.name), stage).join(name)
}

fn write_text(run: &mut StageRun<'_>, name: &str, text: &str) -> Result<()> {
    let path = run.dir().join(name);
    write_atomic(&path, text.as_bytes())?;
    run.output(path);
    Ok(())
}

fn write_rows<T: Serialize>(run: &mut StageRun<'_>, name: &str, rows: &[T]) -> Result<()> {
    let path = run.dir().join(name);
    write_jsonl(&path, rows)?;
    run.output(path);
    Ok(())
}

fn write_value<T: Serialize>(run: &mut StageRun<'_>, name: &str, value: &T) -> Result<()> {
    let path = run.dir().join(name);
    write_json_pretty(&path, value)?;
    run.output(path);
    Ok(())
}

fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' }).collect()
}

/// Class languages narrowed by the run's language selection.
fn class_languages(ctx: &Context, class: &ClassSpec) -> Vec<String> {
    let selected = ctx.languages();
    class.languages.iter().filter(|l| selected.contains(l)).cloned().collect()
}

pub(super) fn load_records(ctx: &Context, class: &ClassSpec) -> Result<Vec<EntityRecord>> {
    read_jsonl(&file(ctx, class, Stage::Ingest, "records.jsonl"))
}

pub(super) fn load_sample(ctx: &Context, class: &ClassSpec) -> Result<SampleSet> {
    read_json(&file(ctx, class, Stage::Sample, "sample.json"))
}

pub(super) fn load_generations(ctx: &Context, class: &ClassSpec) -> Result<Vec<(String, GenerationRecord)>> {
    let rows: Vec<GenerationRow> = read_jsonl(&file(ctx, class, Stage::Generate, "generations.jsonl"))?;
    Ok(rows
        .into_iter()
        .filter_map(|r| match r.outcome {
            GenerationOutcome::Generated(g) => Some((r.model, g)),
            GenerationOutcome::Skipped { .. } => None,
        })
        .collect())
}

fn dataset_dir(ctx: &Context, class: &ClassSpec) -> PathBuf {
    file(ctx, class, Stage::Evidence, "dataset")
}

pub fn ingest(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let table = match &ctx.config.regions {
        Some(path) => RegionTable::load(path)?,
        None => RegionTable::shipped(),
    };
    let http = ctx.http(class)?;
    let endpoints = ctx.ingest_endpoints();
    let out = ingest_class(
        &http,
        class,
        &endpoints,
        &table,
        ctx.config.page_size,
        &ctx.config.snapshot,
        ctx.mode(),
        ctx.threads(),
    )?;
    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Ingest)?;
    if let Some(path) = &ctx.config.regions {
        run.input(path)?;
    }
    write_rows(&mut run, "raw_rows.jsonl", &out.raw_rows)?;
    write_rows(&mut run, "records.jsonl", &out.records)?;
    write_value(&mut run, "ingest.json", &out.manifest)?;
    if out.records.is_empty() {
        run.warn(format!("{}: no class member has a Wikipedia page", class.name));
    }
    run.finish()
}

pub fn stats(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let upstream = ctx.require(Some(&class.name), Stage::Ingest)?;
    let records = load_records(ctx, class)?;
    let http = ctx.http(class)?;
    let profiles = collect_profiles(
        &http,
        &ctx.wiki_endpoints(),
        &records,
        &class.languages,
        &ctx.config.window,
        ctx.mode(),
        ctx.threads(),
    )?;
    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Stats)?;
    run.input_manifest(&upstream);
    write_rows(&mut run, "profiles.jsonl", &profiles)?;
    run.finish()
}

fn tier_metric(ctx: &Context) -> String {
    format!("{}_pageviews", ctx.config.plan.pivot_language)
}

pub fn tier(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let upstream = ctx.require(Some(&class.name), Stage::Stats)?;
    let profiles: Vec<PopularityProfile> = read_jsonl(&file(ctx, class, Stage::Stats, "profiles.jsonl"))?;
    let pivot = &ctx.config.plan.pivot_language;
    let values: Vec<(Qid, u64)> = profiles.iter().filter_map(|p| p.lang(pivot).map(|s| (p.qid, s.pageviews))).collect();
    let tiers = partition_tiers(&values, &tier_metric(ctx))?;
    let corr = correlation_matrix(&class.name, &profile_metrics(&profiles, &class.languages), ctx.config.correlation);

    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Tier)?;
    run.input_manifest(&upstream);
    write_text(&mut run, "tiers.csv", &tiers.to_csv())?;
    write_value(&mut run, "boundary.json", &tiers.boundary)?;
    write_text(&mut run, "correlation.csv", &corr.to_csv())?;
    write_value(&mut run, "correlation.json", &corr)?;
    run.finish()
}

pub fn sample(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let ing = ctx.require(Some(&class.name), Stage::Ingest)?;
    let sta = ctx.require(Some(&class.name), Stage::Stats)?;
    let tie = ctx.require(Some(&class.name), Stage::Tier)?;
    let records = load_records(ctx, class)?;
    let profiles: BTreeMap<Qid, PopularityProfile> =
        read_jsonl::<PopularityProfile>(&file(ctx, class, Stage::Stats, "profiles.jsonl"))?
            .into_iter()
            .map(|p| (p.qid, p))
            .collect();
    let tiers_text = std::fs::read_to_string(file(ctx, class, Stage::Tier, "tiers.csv"))?;
    let tiers = TierAssignment::from_csv(&tier_metric(ctx), &tiers_text)?;

    let plan = &ctx.config.plan;
    let pool: Vec<Candidate> =
        records.iter().map(|r| Candidate::from_parts(r, profiles.get(&r.qid), &plan.pivot_language)).collect();
    let eligible = filter_eligible(&pool, plan);
    let set = annotate_ambiguity(draw_sample(&eligible, &tiers, plan)?, &pool);

    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Sample)?;
    for m in [&ing, &sta, &tie] {
        run.input_manifest(m);
    }
    if let Some(msg) = &set.shortfall {
        run.warn(format!("{}: {msg}", class.name));
    }
    let secondary = class.languages.iter().find(|l| **l != plan.pivot_language).map(String::as_str);
    write_text(&mut run, "sample.jsonl", &set.to_jsonl()?)?;
    write_value(&mut run, "sample.json", &set)?;
    write_text(&mut run, "counts.md", &set.counts.to_markdown(secondary))?;
    run.finish()
}

pub fn evidence(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let upstream = ctx.require(Some(&class.name), Stage::Sample)?;
    let set = load_sample(ctx, class)?;
    let http = ctx.http(class)?;
    let bundles = collect_bundles(
        &http,
        &ctx.wiki_endpoints(),
        &set.entries,
        &class_languages(ctx, class),
        &ctx.config.evidence,
        &ctx.config.snapshot,
        ctx.mode(),
        ctx.threads(),
    )?;
    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Evidence)?;
    run.input_manifest(&upstream);
    for b in bundles.iter().filter(|b| !b.flags.is_empty()) {
        run.warnings.push(format!("{} [{}]: {}", b.qid, b.language, b.flags.join("; ")));
    }
    let dataset = Dataset::new(set, bundles, ctx.config.evidence.min_paragraph_chars);
    let dir = run.dir().join("dataset");
    write_dataset(&dataset, &dir)?;
    run.output(dir);
    run.finish()
}

pub fn generate(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let upstream = ctx.require(Some(&class.name), Stage::Sample)?;
    let set = load_sample(ctx, class)?;
    let languages = class_languages(ctx, class);
    let mut rows = Vec::new();
    for gen in &ctx.config.generators {
        let client = ctx.chat(gen)?;
        let outcomes = generate_all(
            &client,
            &set.entries,
            &languages,
            &ctx.config.prompts,
            &ctx.config.snapshot,
            ctx.mode(),
            ctx.threads(),
        )?;
        rows.extend(outcomes.into_iter().map(|outcome| GenerationRow { model: gen.model.clone(), outcome }));
    }
    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Generate)?;
    run.input_manifest(&upstream);
    for r in &rows {
        if let GenerationOutcome::Skipped { qid, language, reason } = &r.outcome {
            if !reason.starts_with("no ") {
                run.warnings.push(format!("{} {qid} [{language}]: {reason}", r.model));
            }
        }
    }
    let records: Vec<GenerationRecord> = rows
        .iter()
        .filter_map(|r| match &r.outcome {
            GenerationOutcome::Generated(g) => Some(g.clone()),
            GenerationOutcome::Skipped { .. } => None,
        })
        .collect();
    write_rows(&mut run, "generations.jsonl", &rows)?;
    write_value(&mut run, "generation_stats.json", &generation_stats(&records, None))?;
    run.finish()
}

enum Evaluated {
    Scored { facts: Vec<AtomicFact>, verdicts: Vec<Verdict>, entities: Vec<EntityPrecision> },
    Skipped(String),
}

pub fn evaluate(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let gen = ctx.require(Some(&class.name), Stage::Generate)?;
    let evi = ctx.require(Some(&class.name), Stage::Evidence)?;
    let dataset = read_dataset(&dataset_dir(ctx, class))?;
    let languages = class_languages(ctx, class);
    let generations: Vec<(String, GenerationRecord)> =
        load_generations(ctx, class)?.into_iter().filter(|(_, g)| languages.contains(&g.language)).collect();
    let extractor = ctx.chat(&ctx.config.extractor)?;
    let judge = ctx.chat(&ctx.config.judge)?;
    let configs = ctx.evidence_configs();
    let mode = ctx.mode();
    let cfg = &ctx.config;

    let evaluate_one = |(model, g): &(String, GenerationRecord)| -> Result<Evaluated> {
        let (Some(entry), Some(bundle)) = (dataset.sample.get(g.qid), dataset.bundle(g.qid, &g.language)) else {
            return Ok(Evaluated::Skipped("no evidence bundle".to_string()));
        };
        let topic = entry.titles.get(&g.language).map_or(bundle.entity_page.title.as_str(), String::as_str);
        let facts = match extract_facts(&extractor, g, topic, &cfg.fact_prompts) {
            Ok(f) => f,
            Err(e @ (Error::Config(_) | Error::ReplayMiss(_))) => return Err(e),
            Err(e) => return Ok(Evaluated::Skipped(format!("fact extraction failed: {e}"))),
        };
        if facts.is_empty() {
            return Ok(Evaluated::Skipped("no atomic facts extracted".into()));
        }
        let verdicts = evaluate_facts(&judge, &facts, bundle, topic, &configs, &cfg.judging, &cfg.fact_prompts, mode)?;
        if let Some(err) = verdicts.iter().filter_map(|v| v.error.as_deref()).find(|e| e.contains("replay cache miss"))
        {
            return Err(Error::ReplayMiss(err.to_string()));
        }
        let mut entities = Vec::new();
        for config in EvidenceConfig::ALL {
            let subset: Vec<Verdict> = verdicts.iter().filter(|v| v.config == config).cloned().collect();
            if let Some(score) = score_entity(&subset) {
                entities.push(EntityPrecision::from_score(
                    g.qid,
                    model,
                    &g.language,
                    &class.name,
                    entry.tier,
                    entry.region,
                    config,
                    &score,
                ));
            }
        }
        Ok(Evaluated::Scored { facts, verdicts, entities })
    };
    let results = par::bounded(mode, ctx.threads(), || par::try_map(mode, &generations, evaluate_one))?;

    let mut run = StageRun::start(ctx, Some(&class.name), Stage::Evaluate)?;
    run.input_manifest(&gen);
    run.input_manifest(&evi);
    let (mut facts, mut verdicts, mut entities) = (Vec::new(), Vec::new(), Vec::new());
    for ((model, g), r) in generations.iter().zip(results) {
        match r {
            Evaluated::Scored { facts: f, verdicts: v, entities: e } => {
                facts.extend(f.into_iter().map(|fact| FactRecord { model: model.clone(), fact }));
                verdicts.extend(v.into_iter().map(|verdict| VerdictRecord { model: model.clone(), verdict }));
                entities.extend(e);
            }
            Evaluated::Skipped(why) => run.warn(format!("{model} {} [{}] excluded: {why}", g.qid, g.language)),
        }
    }
    let report = aggregate(&entities);
    write_rows(&mut run, "facts.jsonl", &facts)?;
    write_rows(&mut run, "verdicts.jsonl", &verdicts)?;
    write_rows(&mut run, "entities.jsonl", &report.entities)?;
    write_text(&mut run, "entities.csv", &report.entities_csv())?;
    write_text(&mut run, "report.csv", &report.to_csv(&ctx.config_hash[..12]))?;
    write_text(&mut run, "report.md", &report.to_markdown())?;
    run.finish()
}

/// Length mentioned in the entity's own Wikipedia page, if the dataset has one.
fn wikipedia_lengths(dataset: Option<&Dataset>, lang: &str) -> BTreeMap<Qid, f64> {
    let Some(ds) = dataset else { return BTreeMap::new() };
    ds.bundles
        .iter()
        .filter(|b| b.language == lang)
        .filter_map(|b| detect_length_km(&b.entity_page.plaintext, lang).map(|km| (b.qid, km)))
        .collect()
}

pub fn probe_lengths(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let gen = ctx.require(Some(&class.name), Stage::Generate)?;
    let ing = ctx.require(Some(&class.name), Stage::Ingest)?;
    let sam = ctx.require(Some(&class.name), Stage::Sample)?;
    let evi = ctx.optional(Some(&class.name), Stage::Evidence)?;
    let lang = ctx.config.probes.length_language.clone();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let has_length = class.attribute_props.iter().any(|p| p == LENGTH_PROPERTY);
    if !has_length {
        notes.push(format!("{}: class has no {LENGTH_PROPERTY} attribute; nothing to check", class.name));
    } else {
        let set = load_sample(ctx, class)?;
        let records: BTreeMap<Qid, EntityRecord> = load_records(ctx, class)?.into_iter().map(|r| (r.qid, r)).collect();
        let dataset = match &evi {
            Some(_) => Some(read_dataset(&dataset_dir(ctx, class))?),
            None => None,
        };
        let wiki = wikipedia_lengths(dataset.as_ref(), &lang);
        let corrections = match &ctx.config.probes.corrections {
            Some(p) => read_corrections(p)?,
            None => BTreeMap::new(),
        };
        for (model, g) in load_generations(ctx, class)?.iter().filter(|(_, g)| g.language == lang) {
            let Some(entry) = set.get(g.qid) else { continue };
            let wikidata = records.get(&g.qid).and_then(|r| r.attributes.get(LENGTH_PROPERTY)).and_then(|a| a.as_km());
            checks.push(AttributeCheck::new(
                g.qid,
                entry.tier,
                model,
                detect_length_km(&g.response, &lang),
                wikidata,
                wiki.get(&g.qid).copied(),
                corrections.get(&g.qid).copied(),
            ));
        }
        let missing = checks.iter().filter(|c| c.predicted_km.is_none()).count();
        if missing > 0 {
            notes.push(format!("{}: {missing} responses state no length", class.name));
        }
    }
    let mut run = StageRun::start(ctx, Some(&class.name), Stage::ProbeLengths)?;
    for m in [Some(&gen), Some(&ing), Some(&sam), evi.as_ref()].into_iter().flatten() {
        run.input_manifest(m);
    }
    if let Some(p) = &ctx.config.probes.corrections {
        run.input(p)?;
    }
    for n in notes {
        run.warn(n);
    }
    write_text(&mut run, "river_lengths.csv", &checks_csv(&checks))?;
    write_text(&mut run, "summary.md", &summary_markdown(&summarize_checks(&checks)))?;
    run.finish()
}

pub fn probe_lex(ctx: &mut Context, class: &ClassSpec) -> Result<RunManifest> {
    let gen = ctx.require(Some(&class.name), Stage::Generate)?;
    let sam = ctx.require(Some(&class.name), Stage::Sample)?;
    let set = load_sample(ctx, class)?;
    let tiers: BTreeMap<Qid, Tier> = set.entries.iter().map(|e| (e.qid, e.tier)).collect();
    let stride = ctx.config.probes.heaps_stride;

    // generations are already in sample order, so token streams are stable
    let mut streams: BTreeMap<(String, String), BTreeMap<Tier, Vec<String>>> = BTreeMap::new();
    for (model, g) in load_generations(ctx, class)? {
        let Some(tier) = tiers.get(&g.qid) else { continue };
        let tokens = lexical_tokens(&g.response, &g.language);
        streams.entry((model, g.language.clone())).or_default().entry(*tier).or_default().extend(tokens);
    }

    let mut run = StageRun::start(ctx, Some(&class.name), Stage::ProbeLex)?;
    run.input_manifest(&gen);
    run.input_manifest(&sam);
    let mut heaps = String::from("model,language,tier,tokens,vocabulary\n");
    let mut fits = String::from("model,language,tier,points,k,beta,r_squared\n");
    for ((model, lang), by_tier) in &streams {
        let curves: Vec<(Tier, HeapsCurve)> =
            by_tier.iter().map(|(t, toks)| (*t, vocab_growth(toks, stride))).collect();
        for (tier, curve) in &curves {
            for (n, v) in &curve.points {
                let _ = writeln!(heaps, "{model},{lang},{tier},{n},{v}");
            }
            match fit_heaps(&curve.points) {
                Some(f) => {
                    let _ = writeln!(
                        fits,
                        "{model},{lang},{tier},{},{:.6},{:.6},{:.6}",
                        curve.points.len(),
                        f.k,
                        f.beta,
                        f.r_squared
                    );
                }
                None => {
                    let _ = writeln!(fits, "{model},{lang},{tier},{},,,", curve.points.len());
                    run.warn(format!("{model} [{lang}] {tier}: too little text to fit a growth curve"));
                }
            }
        }
        let series: Vec<Series<'_>> = curves.iter().map(|(t, c)| Series { label: t.as_str(), curve: c }).collect();
        let svg = render_svg(&format!("{} - {model} ({lang})", class.name), &series);
        write_text(&mut run, &format!("heaps_{}_{lang}.svg", slug(model)), &svg)?;
    }
    write_text(&mut run, "heaps.csv", &heaps)?;
    write_text(&mut run, "fits.csv", &fits)?;
    run.finish()
}

/// Per-language fact counts for each (entity, language), summed over models.
pub(super) fn fact_counts(path: &Path) -> Result<BTreeMap<(String, Qid, String), usize>> {
    let mut out = BTreeMap::new();
    for r in read_jsonl::<FactRecord>(path)? {
        *out.entry((r.model, r.fact.qid, r.fact.language)).or_default() += 1;
    }
    Ok(out)
}
