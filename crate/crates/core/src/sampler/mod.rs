//! Stratified sampling of the dataset from a tiered base class.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EntityRecord, Region};
use crate::popularity::{Tier, TierAssignment};
use crate::qid::Qid;
use crate::wikistats::PopularityProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas {
    pub head: usize,
    pub torso: usize,
    pub tail: usize,
}

impl Default for Quotas {
    fn default() -> Self {
        Quotas { head: 100, torso: 200, tail: 700 }
    }
}

impl Quotas {
    pub fn get(&self, tier: Tier) -> usize {
        match tier {
            Tier::Head => self.head,
            Tier::Torso => self.torso,
            Tier::Tail => self.tail,
        }
    }

    pub fn total(&self) -> usize {
        self.head + self.torso + self.tail
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingPlan {
    pub quotas: Quotas,
    pub min_page_chars: u64,
    pub exclude_stubs: bool,
    pub region_uniform: bool,
    pub seed: u64,
    /// Language whose page decides eligibility.
    pub pivot_language: String,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            quotas: Quotas::default(),
            min_page_chars: 200,
            exclude_stubs: true,
            region_uniform: true,
            seed: 0,
            pivot_language: "en".into(),
        }
    }
}

/// What the sampler needs to know about one base-class entity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub qid: Qid,
    pub region: Region,
    pub titles: BTreeMap<String, String>,
    /// Pivot-language page length; `None` when there is no page.
    pub page_length_chars: Option<u64>,
    pub is_stub: bool,
}

impl Candidate {
    pub fn from_parts(record: &EntityRecord, profile: Option<&PopularityProfile>, pivot: &str) -> Self {
        let signals = profile.and_then(|p| p.lang(pivot));
        Candidate {
            qid: record.qid,
            region: record.region,
            titles: record.wiki_titles.clone(),
            page_length_chars: signals.map(|s| s.page_length_chars),
            is_stub: signals.is_some_and(|s| s.is_stub),
        }
    }
}

pub fn filter_eligible(pool: &[Candidate], plan: &SamplingPlan) -> Vec<Candidate> {
    pool.iter()
        .filter(|c| c.titles.contains_key(&plan.pivot_language))
        .filter(|c| !(plan.exclude_stubs && c.is_stub))
        .filter(|c| c.page_length_chars.is_some_and(|n| n >= plan.min_page_chars))
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub qid: Qid,
    pub tier: Tier,
    pub region: Region,
    pub titles: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub namesakes: Option<usize>,
}

/// One row of the counts table: entities in total and per language with a page.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub total: usize,
    pub with_page: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub tiers: BTreeMap<Tier, CountRow>,
    pub regions: BTreeMap<Region, CountRow>,
    pub total: CountRow,
}

impl SampleCounts {
    pub fn of(entries: &[SampleEntry]) -> Self {
        let mut tiers: BTreeMap<Tier, CountRow> = Tier::ALL.into_iter().map(|t| (t, CountRow::default())).collect();
        let mut regions: BTreeMap<Region, CountRow> =
            Region::ALL.into_iter().map(|r| (r, CountRow::default())).collect();
        let mut total = CountRow::default();
        for e in entries {
            for row in [tiers.get_mut(&e.tier).unwrap(), regions.get_mut(&e.region).unwrap(), &mut total] {
                row.total += 1;
                for lang in e.titles.keys() {
                    *row.with_page.entry(lang.clone()).or_default() += 1;
                }
            }
        }
        SampleCounts { tiers, regions, total }
    }

    /// Markdown table with one column per language, secondary counts in parentheses.
    pub fn to_markdown(&self, secondary: Option<&str>) -> String {
        let cell = |row: &CountRow| match secondary {
            Some(lang) => format!("{} ({})", row.total, row.with_page.get(lang).copied().unwrap_or(0)),
            None => row.total.to_string(),
        };
        let mut out = String::from("| | count |\n|---|---:|\n");
        for (t, row) in &self.tiers {
            out.push_str(&format!("| {t} | {} |\n", cell(row)));
        }
        for (r, row) in &self.regions {
            out.push_str(&format!("| {r} | {} |\n", cell(row)));
        }
        out.push_str(&format!("| Total | {} |\n", cell(&self.total)));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSet {
    pub entries: Vec<SampleEntry>,
    pub plan: SamplingPlan,
    pub counts: SampleCounts,
    /// Set when the eligible pool could not fill the quotas.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shortfall: Option<String>,
}

impl SampleSet {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn get(&self, qid: Qid) -> Option<&SampleEntry> {
        self.entries.iter().find(|e| e.qid == qid)
    }
}

/// Fisher-Yates with u64 draws so the permutation does not depend on the
/// platform's pointer width.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

fn draw(members: &[&Candidate], k: usize, plan: &SamplingPlan, tier: Tier) -> Vec<Candidate> {
    if k >= members.len() {
        return members.iter().map(|c| (*c).clone()).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(tier as u64);
    if !plan.region_uniform {
        let mut all: Vec<&Candidate> = members.to_vec();
        shuffle(&mut all, &mut rng);
        return all.into_iter().take(k).cloned().collect();
    }
    let mut by_region: Vec<Vec<&Candidate>> =
        Region::ALL.iter().map(|r| members.iter().copied().filter(|c| c.region == *r).collect()).collect();
    for bucket in &mut by_region {
        shuffle(bucket, &mut rng);
    }
    let mut cursors = vec![0usize; by_region.len()];
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        for (bucket, cursor) in by_region.iter().zip(cursors.iter_mut()) {
            if picked.len() == k {
                break;
            }
            if let Some(c) = bucket.get(*cursor) {
                picked.push((*c).clone());
                *cursor += 1;
            }
        }
    }
    picked
}

fn entry(c: Candidate, tier: Tier) -> SampleEntry {
    SampleEntry { qid: c.qid, tier, region: c.region, titles: c.titles, base_name: None, namesakes: None }
}

/// Draws the dataset. Head and Torso shortfalls are added to the Tail quota.
///
/// If the eligible pool is no larger than the total quota it is returned
/// whole. If the Tail cannot absorb the reallocated deficit the sample comes
/// out short, with a warning, rather than pushing Head or Torso past quota.
pub fn sample(eligible: &[Candidate], tiers: &TierAssignment, plan: &SamplingPlan) -> Result<SampleSet> {
    let tier_map = tiers.map();
    let mut seen = BTreeSet::new();
    let mut by_tier: BTreeMap<Tier, Vec<&Candidate>> = BTreeMap::new();
    for c in eligible {
        if !seen.insert(c.qid) {
            return Err(Error::validation(format!("{} appears twice in the eligible pool", c.qid)));
        }
        let tier =
            tier_map.get(&c.qid).ok_or_else(|| Error::validation(format!("{} has no tier assignment", c.qid)))?;
        by_tier.entry(*tier).or_default().push(c);
    }
    for members in by_tier.values_mut() {
        members.sort_by_key(|c| c.qid);
    }

    let quota_total = plan.quotas.total();
    let mut shortfall = None;
    let mut chosen: Vec<SampleEntry> = Vec::new();
    if eligible.len() <= quota_total {
        if eligible.len() < quota_total {
            let msg = format!("eligible pool has {} entities, quotas ask for {quota_total}", eligible.len());
            log::warn!("{msg}");
            shortfall = Some(msg);
        }
        for (tier, members) in &by_tier {
            chosen.extend(members.iter().map(|c| entry((*c).clone(), *tier)));
        }
    } else {
        let mut tail_quota = plan.quotas.tail;
        for tier in Tier::ALL {
            let members = by_tier.get(&tier).map(Vec::as_slice).unwrap_or(&[]);
            let quota = if tier == Tier::Tail { tail_quota } else { plan.quotas.get(tier) };
            if tier != Tier::Tail && members.len() < quota {
                tail_quota += quota - members.len();
            }
            if tier == Tier::Tail && members.len() < quota {
                let msg = format!("Tail has {} eligible entities for a reallocated quota of {quota}", members.len());
                log::warn!("{msg}");
                shortfall = Some(msg);
            }
            chosen.extend(draw(members, quota, plan, tier).into_iter().map(|c| entry(c, tier)));
        }
    }
    // Region's Ord follows the round-robin order
    chosen.sort_by_key(|e| (e.tier, e.region, e.qid));
    let counts = SampleCounts::of(&chosen);
    Ok(SampleSet { entries: chosen, plan: plan.clone(), counts, shortfall })
}

/// Title with a trailing parenthetical removed.
pub fn base_name(title: &str) -> &str {
    let t = title.trim();
    if let Some(stripped) = t.strip_suffix(')').or_else(|| t.strip_suffix('）')) {
        if let Some(open) = stripped.rfind(['(', '（']) {
            let base = stripped[..open].trim();
            if !base.is_empty() {
                return base;
            }
        }
    }
    t
}

/// Fills base names and namesake counts, counting namesakes over `pool`.
pub fn annotate_ambiguity(mut sample: SampleSet, pool: &[Candidate]) -> SampleSet {
    let pivot = sample.plan.pivot_language.clone();
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    for c in pool {
        if let Some(t) = c.titles.get(&pivot) {
            *groups.entry(base_name(t)).or_default() += 1;
        }
    }
    for e in &mut sample.entries {
        if let Some(t) = e.titles.get(&pivot) {
            let base = base_name(t);
            e.namesakes = Some(groups.get(base).copied().unwrap_or(0).max(1));
            e.base_name = Some(base.to_string());
        }
    }
    sample
}

/// Number of base names in `pool` shared by more than one entity.
pub fn non_unique_names(pool: &[Candidate], lang: &str) -> usize {
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    for c in pool {
        if let Some(t) = c.titles.get(lang) {
            *groups.entry(base_name(t)).or_default() += 1;
        }
    }
    groups.values().filter(|n| **n > 1).count()
}
