//! Directory layout:
//!
//! ```text
//! manifest.json
//! entities.jsonl
//! evidence/<qid>/<lang>/<source>/<n>.txt
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{segment_paragraphs, EvidenceBundle, Page, PageSource};
use crate::error::{Error, Result};
use crate::qid::Qid;
use crate::sampler::{SampleEntry, SampleSet};
use crate::util::{read_jsonl, write_atomic, write_json_pretty};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub plan: crate::sampler::SamplingPlan,
    pub counts: crate::sampler::SampleCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shortfall: Option<String>,
    pub min_paragraph_chars: usize,
    pub entities: usize,
    pub bundles: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct PageMeta {
    title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    redirected_from: Option<String>,
    #[serde(default)]
    stripped: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct BundleMeta {
    collected_at: String,
    #[serde(default)]
    flags: Vec<String>,
    pages: BTreeMap<PageSource, Vec<PageMeta>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct EntityLine {
    #[serde(flatten)]
    entry: SampleEntry,
    evidence: BTreeMap<String, BundleMeta>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub sample: SampleSet,
    pub bundles: Vec<EvidenceBundle>,
    pub min_paragraph_chars: usize,
}

impl Dataset {
    /// Orders bundles by sample position, then language, which is the order
    /// `read_dataset` produces.
    pub fn new(sample: SampleSet, mut bundles: Vec<EvidenceBundle>, min_paragraph_chars: usize) -> Self {
        let pos: BTreeMap<Qid, usize> = sample.entries.iter().enumerate().map(|(i, e)| (e.qid, i)).collect();
        bundles.sort_by(|a, b| (pos.get(&a.qid), &a.language).cmp(&(pos.get(&b.qid), &b.language)));
        Dataset { sample, bundles, min_paragraph_chars }
    }

    pub fn bundle(&self, qid: Qid, lang: &str) -> Option<&EvidenceBundle> {
        self.bundles.iter().find(|b| b.qid == qid && b.language == lang)
    }
}

fn pages_of(bundle: &EvidenceBundle, source: PageSource) -> Vec<&Page> {
    match source {
        PageSource::EntityPage => vec![&bundle.entity_page],
        PageSource::SearchHit => bundle.search_pages.iter().collect(),
        PageSource::Inlink => bundle.inlink_pages.iter().collect(),
    }
}

fn page_dir(root: &Path, qid: Qid, lang: &str, source: PageSource) -> PathBuf {
    root.join("evidence").join(qid.to_string()).join(lang).join(source.as_str())
}

/// Writes the dataset into a sibling temp directory and renames it into
/// place, so readers never see a half-written dataset.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("dataset");
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;

    let mut by_entity: BTreeMap<Qid, BTreeMap<String, BundleMeta>> = BTreeMap::new();
    for b in &dataset.bundles {
        b.validate()?;
        let mut pages = BTreeMap::new();
        for source in PageSource::ALL {
            let list = pages_of(b, source);
            if list.is_empty() {
                continue;
            }
            let dir = page_dir(&tmp, b.qid, &b.language, source);
            fs::create_dir_all(&dir)?;
            let mut metas = Vec::new();
            for (n, page) in list.iter().enumerate() {
                write_atomic(&dir.join(format!("{n}.txt")), page.plaintext.as_bytes())?;
                metas.push(PageMeta {
                    title: page.title.clone(),
                    redirected_from: page.redirected_from.clone(),
                    stripped: page.stripped,
                });
            }
            pages.insert(source, metas);
        }
        let meta = BundleMeta { collected_at: b.collected_at.clone(), flags: b.flags.clone(), pages };
        by_entity.entry(b.qid).or_default().insert(b.language.clone(), meta);
    }

    let mut lines = String::new();
    for entry in &dataset.sample.entries {
        let line = EntityLine { entry: entry.clone(), evidence: by_entity.remove(&entry.qid).unwrap_or_default() };
        lines.push_str(&serde_json::to_string(&line)?);
        lines.push('\n');
    }
    if let Some(orphan) = by_entity.keys().next() {
        return Err(Error::validation(format!("bundle for {orphan} which is not in the sample")));
    }
    write_atomic(&tmp.join("entities.jsonl"), lines.as_bytes())?;
    let manifest = DatasetManifest {
        plan: dataset.sample.plan.clone(),
        counts: dataset.sample.counts.clone(),
        shortfall: dataset.sample.shortfall.clone(),
        min_paragraph_chars: dataset.min_paragraph_chars,
        entities: dataset.sample.entries.len(),
        bundles: dataset.bundles.len(),
    };
    write_json_pretty(&tmp.join("manifest.json"), &manifest)?;

    if path.exists() {
        fs::remove_dir_all(path)?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = path.join("manifest.json");
    let text =
        fs::read_to_string(&manifest_path).map_err(|e| Error::Load(format!("{}: {e}", manifest_path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Load(format!("corrupt manifest {}: {e}", manifest_path.display())))?;
    let lines: Vec<EntityLine> =
        read_jsonl(&path.join("entities.jsonl")).map_err(|e| Error::Load(format!("entities.jsonl: {e}")))?;
    if lines.len() != manifest.entities {
        return Err(Error::Load(format!(
            "manifest lists {} entities, entities.jsonl has {}",
            manifest.entities,
            lines.len()
        )));
    }

    let min = manifest.min_paragraph_chars;
    let mut bundles = Vec::new();
    let mut entries = Vec::new();
    for line in lines {
        let qid = line.entry.qid;
        for (lang, meta) in &line.evidence {
            let mut by_source: BTreeMap<PageSource, Vec<Page>> = BTreeMap::new();
            for (source, metas) in &meta.pages {
                let dir = page_dir(path, qid, lang, *source);
                let mut pages = Vec::new();
                for (n, m) in metas.iter().enumerate() {
                    let file = dir.join(format!("{n}.txt"));
                    let plaintext = fs::read_to_string(&file)
                        .map_err(|e| Error::Load(format!("{qid}: missing evidence {}: {e}", file.display())))?;
                    pages.push(Page {
                        title: m.title.clone(),
                        language: lang.clone(),
                        paragraphs: segment_paragraphs(&plaintext, min),
                        plaintext,
                        source: *source,
                        redirected_from: m.redirected_from.clone(),
                        stripped: m.stripped,
                    });
                }
                by_source.insert(*source, pages);
            }
            let entity_page = by_source
                .remove(&PageSource::EntityPage)
                .and_then(|mut v| (!v.is_empty()).then(|| v.remove(0)))
                .ok_or_else(|| Error::Load(format!("{qid}/{lang}: no entity page")))?;
            bundles.push(EvidenceBundle {
                qid,
                language: lang.clone(),
                tier: line.entry.tier,
                entity_page,
                search_pages: by_source.remove(&PageSource::SearchHit).unwrap_or_default(),
                inlink_pages: by_source.remove(&PageSource::Inlink).unwrap_or_default(),
                collected_at: meta.collected_at.clone(),
                flags: meta.flags.clone(),
            });
        }
        entries.push(line.entry);
    }
    let sample = SampleSet { entries, plan: manifest.plan, counts: manifest.counts, shortfall: manifest.shortfall };
    Ok(Dataset { sample, bundles, min_paragraph_chars: min })
}
