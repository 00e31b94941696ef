use std::path::Path;

use super::*;
use crate::factuality::EvidenceConfig;

fn sim_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(
        r#"
languages = ["en", "zh"]
threads = 4
[source]
kind = "sim"
entities = 120
[plan]
seed = 7
[plan.quotas]
head = 4
torso = 6
tail = 12
[evidence]
inlink_cap = 5
"#,
    )
    .unwrap();
    cfg.out_dir = root.join("out");
    cfg.cache_dir = root.join("cache");
    cfg
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    walk_files(root)
        .unwrap()
        .into_iter()
        .map(|p| (p.strip_prefix(root).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn stage_names_round_trip() {
    for s in Stage::ALL {
        assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
    }
    assert!("bogus".parse::<Stage>().is_err());
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&Error::config("x")), 2);
    assert_eq!(exit_code(&Error::Dependency { stage: "stats".into(), path: "p".into() }), 3);
    assert_eq!(exit_code(&Error::Timeout { url: "u".into() }), 4);
    assert_eq!(exit_code(&Error::Load("x".into())), 1);
}

#[test]
fn missing_upstream_is_a_dependency_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = Context::new(sim_config(dir.path()), FetchMode::Live, false, Selection::default()).unwrap();
    let err = run_stage(&mut ctx, Stage::Tier).unwrap_err();
    assert!(matches!(&err, Error::Dependency { stage, .. } if stage == "stats"), "{err}");
    assert!(err.to_string().contains("run `stats` first"));
}

#[test]
fn unknown_selection_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sel = Selection { classes: Some(vec!["cars".into()]), ..Default::default() };
    assert!(matches!(Context::new(sim_config(dir.path()), FetchMode::Live, false, sel), Err(Error::Config(_))));
}

#[test]
fn offline_run_is_reproducible_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sim_config(dir.path());
    let mut ctx = Context::new(cfg.clone(), FetchMode::Live, false, Selection::default()).unwrap();
    run_all(&mut ctx).unwrap();

    let out = dir.path().join("out");
    for f in [
        "rivers/ingest/records.jsonl",
        "rivers/tier/tiers.csv",
        "rivers/sample/counts.md",
        "rivers/evidence/dataset/manifest.json",
        "rivers/evaluate/report.md",
        "rivers/probe-lengths/river_lengths.csv",
        "rivers/probe-lex/fits.csv",
        "report/factuality.csv",
        "report/manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let set: crate::sampler::SampleSet = read_json(&out.join("rivers/sample/sample.json")).unwrap();
    assert_eq!(set.entries.len(), 22);
    let m: RunManifest = read_json(&out.join("rivers/evaluate/manifest.json")).unwrap();
    assert_eq!(m.wall_time_ms, None);
    assert!(m.inputs.keys().any(|k| k.starts_with("rivers/generate/")));
    let csv = std::fs::read_to_string(out.join("report/factuality.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(csv.contains(",links,"));

    // same config into another directory, from scratch and then from the cache alone
    let fresh_root = dir.path().join("fresh");
    let mut fresh_cfg = cfg.clone();
    fresh_cfg.out_dir = fresh_root.join("out");
    fresh_cfg.cache_dir = fresh_root.join("cache");
    run_all(&mut Context::new(fresh_cfg, FetchMode::Live, false, Selection::default()).unwrap()).unwrap();
    assert_eq!(tree(&out), tree(&fresh_root.join("out")));

    let mut replay_cfg = cfg;
    replay_cfg.out_dir = dir.path().join("replayed");
    run_all(&mut Context::new(replay_cfg, FetchMode::Replay, false, Selection::default()).unwrap()).unwrap();
    assert_eq!(tree(&out), tree(&dir.path().join("replayed")));
}

#[test]
fn config_change_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sim_config(dir.path());
    let mut ctx = Context::new(cfg.clone(), FetchMode::Live, false, Selection::default()).unwrap();
    run_stage(&mut ctx, Stage::Ingest).unwrap();
    run_stage(&mut ctx, Stage::Stats).unwrap();

    let changed = RunConfig { snapshot: "2025-06-30".into(), ..cfg };
    let mut ctx = Context::new(changed.clone(), FetchMode::Live, false, Selection::default()).unwrap();
    assert!(matches!(run_stage(&mut ctx, Stage::Tier), Err(Error::Config(_))));
    let mut forced = Context::new(changed, FetchMode::Live, true, Selection::default()).unwrap();
    run_stage(&mut forced, Stage::Tier).unwrap();
}

#[test]
fn selection_narrows_languages_and_configs() {
    let dir = tempfile::tempdir().unwrap();
    let sel = Selection {
        languages: Some(vec!["en".into()]),
        evidence: Some(vec![EvidenceConfig::OnePage]),
        ..Default::default()
    };
    let mut ctx = Context::new(sim_config(dir.path()), FetchMode::Live, false, sel).unwrap();
    run_all(&mut ctx).unwrap();
    let entities: Vec<crate::factuality::EntityPrecision> =
        crate::util::read_jsonl(&dir.path().join("out/rivers/evaluate/entities.jsonl")).unwrap();
    assert!(!entities.is_empty());
    assert!(entities.iter().all(|e| e.language == "en" && e.config == EvidenceConfig::OnePage));
}

#[test]
fn report_without_evaluation_is_empty_but_valid() {
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = Context::new(sim_config(dir.path()), FetchMode::Live, false, Selection::default()).unwrap();
    let m = run_stage(&mut ctx, Stage::Report).unwrap();
    assert_eq!(m.len(), 1);
    let md = std::fs::read_to_string(dir.path().join("out/report/factuality.md")).unwrap();
    assert_eq!(md, "No evaluated generations.\n");
}
