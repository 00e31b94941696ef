use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::stages::{fact_counts, load_generations};
use super::{Context, RunManifest, Stage, StageRun};
use crate::error::Result;
use crate::factuality::{aggregate, EntityPrecision};
use crate::llm::{generation_stats, GenerationRecord, GenerationStats};
use crate::popularity::CorrelationReport;
use crate::qid::Qid;
use crate::sampler::SampleSet;
use crate::util::{hash_json, read_json, read_jsonl, write_atomic, write_json_pretty};

fn correlation_markdown(report: &CorrelationReport) -> String {
    let mut out = format!("| {} | {} |\n|---|", report.method, report.metrics.join(" | "));
    out.push_str(&"---:|".repeat(report.metrics.len()));
    out.push('\n');
    for (name, row) in report.metrics.iter().zip(&report.matrix) {
        let cells: Vec<String> = row.iter().map(|c| c.map_or("–".to_string(), |r| format!("{r:.2}"))).collect();
        let _ = writeln!(out, "| {name} | {} |", cells.join(" | "));
    }
    out
}

fn stats_markdown(stats: &[GenerationStats]) -> String {
    let mut out =
        String::from("| Model | Language | Responses | Avg sentences | Avg facts |\n|---|---|---:|---:|---:|\n");
    for s in stats {
        let facts = s.avg_facts.map_or("–".to_string(), |f| format!("{f:.1}"));
        let _ = writeln!(out, "| {} | {} | {} | {:.1} | {facts} |", s.model, s.language, s.responses, s.avg_sentences);
    }
    out
}

/// Collates every class's artifacts into `<out>/report/`. Stages that have
/// not run are left out; an output directory with nothing evaluated still
/// yields a valid, empty report.
pub fn report(ctx: &mut Context) -> Result<RunManifest> {
    let classes: Vec<_> = ctx.classes().into_iter().cloned().collect();
    let mut upstream = Vec::new();
    let mut counts = String::new();
    let mut correlations = String::new();
    let mut lengths = String::new();
    let mut entities: Vec<EntityPrecision> = Vec::new();
    let mut records: Vec<(String, GenerationRecord)> = Vec::new();
    let mut facts: BTreeMap<(String, Qid, String), usize> = BTreeMap::new();
    let mut evaluated = false;

    for class in &classes {
        let name = class.name.as_str();
        if let Some(m) = ctx.optional(Some(name), Stage::Sample)? {
            let set: SampleSet = read_json(&ctx.stage_dir(Some(name), Stage::Sample).join("sample.json"))?;
            let secondary = class.languages.iter().find(|l| **l != set.plan.pivot_language).map(String::as_str);
            let _ = write!(counts, "## {name}\n\n{}\n", set.counts.to_markdown(secondary));
            upstream.push(m);
        }
        if let Some(m) = ctx.optional(Some(name), Stage::Tier)? {
            let corr: CorrelationReport = read_json(&ctx.stage_dir(Some(name), Stage::Tier).join("correlation.json"))?;
            let _ = write!(correlations, "## {name}\n\n{}\n", correlation_markdown(&corr));
            upstream.push(m);
        }
        if let Some(m) = ctx.optional(Some(name), Stage::Generate)? {
            records.extend(load_generations(ctx, class)?);
            upstream.push(m);
        }
        if let Some(m) = ctx.optional(Some(name), Stage::Evaluate)? {
            let dir = ctx.stage_dir(Some(name), Stage::Evaluate);
            entities.extend(read_jsonl::<EntityPrecision>(&dir.join("entities.jsonl"))?);
            facts.extend(fact_counts(&dir.join("facts.jsonl"))?);
            evaluated = true;
            upstream.push(m);
        }
        if let Some(m) = ctx.optional(Some(name), Stage::ProbeLengths)? {
            let summary = std::fs::read_to_string(ctx.stage_dir(Some(name), Stage::ProbeLengths).join("summary.md"))?;
            let _ = write!(lengths, "## {name}\n\n{summary}\n");
            upstream.push(m);
        }
    }

    let mut by_model: BTreeMap<&str, Vec<GenerationRecord>> = BTreeMap::new();
    for (model, g) in &records {
        by_model.entry(model).or_default().push(g.clone());
    }
    let mut stats = Vec::new();
    for (model, rs) in &by_model {
        let per_model: BTreeMap<(Qid, String), usize> =
            facts.iter().filter(|((m, _, _), _)| m == model).map(|((_, q, l), n)| ((*q, l.clone()), *n)).collect();
        stats.extend(generation_stats(rs, evaluated.then_some(&per_model)));
    }

    let inputs: Vec<_> = upstream.iter().map(|m| &m.outputs).collect();
    let source = hash_json(&inputs)?[..12].to_string();
    let factuality = aggregate(&entities);

    let mut run = StageRun::start(ctx, None, Stage::Report)?;
    for m in &upstream {
        run.input_manifest(m);
    }
    if !evaluated {
        run.warn("no evaluated generations; factuality tables are empty");
    }
    let dir = run.dir();
    let texts = [
        ("counts.md", counts),
        ("correlation.md", correlations),
        ("generation_stats.md", stats_markdown(&stats)),
        ("factuality.csv", factuality.to_csv(&source)),
        ("factuality.md", factuality.to_markdown()),
        ("entities.csv", factuality.entities_csv()),
        ("lengths.md", lengths),
    ];
    for (name, text) in texts {
        write_atomic(&dir.join(name), text.as_bytes())?;
        run.output(dir.join(name));
    }
    write_json_pretty(&dir.join("generation_stats.json"), &stats)?;
    run.output(dir.join("generation_stats.json"));
    run.finish()
}
