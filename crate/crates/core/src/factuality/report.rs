use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ingest::Region;
use crate::popularity::Tier;
use crate::qid::Qid;
use crate::util::fmt6;

use super::{EntityScore, EvidenceConfig};

/// Precision of one entity's generation under one evidence configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityPrecision {
    pub qid: Qid,
    pub model: String,
    pub language: String,
    pub domain: String,
    pub tier: Tier,
    pub region: Region,
    pub config: EvidenceConfig,
    pub facts: usize,
    pub supported: usize,
    pub abstained: usize,
    pub precision: f64,
}

impl EntityPrecision {
    pub fn from_score(
        qid: Qid,
        model: &str,
        language: &str,
        domain: &str,
        tier: Tier,
        region: Region,
        config: EvidenceConfig,
        score: &EntityScore,
    ) -> Self {
        EntityPrecision {
            qid,
            model: model.to_string(),
            language: language.to_string(),
            domain: domain.to_string(),
            tier,
            region,
            config,
            facts: score.facts,
            supported: score.supported,
            abstained: score.abstained,
            precision: score.precision,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Tier,
    Region,
    Total,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Tier => "tier",
            Dimension::Region => "region",
            Dimension::Total => "total",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub language: String,
    pub domain: String,
    pub model: String,
    pub config: EvidenceConfig,
    pub dimension: Dimension,
    /// Tier or region name; `all` for totals.
    pub group: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub entities: usize,
    pub facts: usize,
    pub supported: usize,
    pub abstained: usize,
    /// Mean of per-entity precisions.
    pub macro_precision: f64,
    /// Supported facts over all facts in the group.
    pub micro_precision: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FactualityReport {
    pub entities: Vec<EntityPrecision>,
    pub groups: BTreeMap<GroupKey, GroupStats>,
}

fn stats(members: &[&EntityPrecision]) -> GroupStats {
    let n = members.len();
    let facts: usize = members.iter().map(|e| e.facts).sum();
    let supported: usize = members.iter().map(|e| e.supported).sum();
    GroupStats {
        entities: n,
        facts,
        supported,
        abstained: members.iter().map(|e| e.abstained).sum(),
        macro_precision: members.iter().map(|e| e.precision).sum::<f64>() / n as f64,
        micro_precision: if facts == 0 { 0.0 } else { supported as f64 / facts as f64 },
    }
}

pub fn aggregate(entities: &[EntityPrecision]) -> FactualityReport {
    let mut members: BTreeMap<GroupKey, Vec<&EntityPrecision>> = BTreeMap::new();
    for e in entities {
        let key = |dimension, group: &str| GroupKey {
            language: e.language.clone(),
            domain: e.domain.clone(),
            model: e.model.clone(),
            config: e.config,
            dimension,
            group: group.to_string(),
        };
        members.entry(key(Dimension::Tier, e.tier.as_str())).or_default().push(e);
        members.entry(key(Dimension::Region, e.region.as_str())).or_default().push(e);
        members.entry(key(Dimension::Total, "all")).or_default().push(e);
    }
    let mut sorted = entities.to_vec();
    sorted.sort_by(|a, b| {
        (&a.language, &a.domain, &a.model, a.config, a.qid).cmp(&(&b.language, &b.domain, &b.model, b.config, b.qid))
    });
    FactualityReport { entities: sorted, groups: members.into_iter().map(|(k, m)| (k, stats(&m))).collect() }
}

fn language_name(code: &str) -> &str {
    match code {
        "en" => "English",
        "zh" => "Chinese",
        other => other,
    }
}

impl FactualityReport {
    pub fn get(&self, key: &GroupKey) -> Option<&GroupStats> {
        self.groups.get(key)
    }

    /// One row per non-empty group. `source` identifies the artifacts the
    /// numbers were computed from.
    pub fn to_csv(&self, source: &str) -> String {
        let mut out = String::from(
            "language,domain,model,config,dimension,group,entities,facts,supported,abstained,macro_precision,micro_precision,source\n",
        );
        for (k, s) in &self.groups {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                k.language,
                k.domain,
                k.model,
                k.config,
                k.dimension.as_str(),
                k.group,
                s.entities,
                s.facts,
                s.supported,
                s.abstained,
                fmt6(s.macro_precision),
                fmt6(s.micro_precision),
                source
            );
        }
        out
    }

    pub fn entities_csv(&self) -> String {
        let mut out =
            String::from("qid,language,domain,model,tier,region,config,facts,supported,abstained,precision\n");
        for e in &self.entities {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.qid,
                e.language,
                e.domain,
                e.model,
                e.tier,
                e.region,
                e.config,
                e.facts,
                e.supported,
                e.abstained,
                fmt6(e.precision)
            );
        }
        out
    }

    /// Macro precision laid out with tiers, regions and totals as rows and
    /// (domain, model) as columns, one block per language. Empty groups
    /// render as "–".
    pub fn to_markdown(&self) -> String {
        let mut columns: BTreeMap<&str, BTreeSet<(&str, &str)>> = BTreeMap::new();
        for k in self.groups.keys() {
            columns.entry(&k.language).or_default().insert((&k.domain, &k.model));
        }
        let mut out = String::new();
        if columns.is_empty() {
            out.push_str("No evaluated generations.\n");
            return out;
        }
        let has_unknown = self.groups.keys().any(|k| k.dimension == Dimension::Region && k.group == "Unknown");
        let mut rows: Vec<(String, Dimension, String, EvidenceConfig)> = Vec::new();
        for tier in Tier::ALL {
            rows.push((tier.to_string(), Dimension::Tier, tier.as_str().into(), EvidenceConfig::OnePage));
            rows.push(("    +search".into(), Dimension::Tier, tier.as_str().into(), EvidenceConfig::PlusSearch));
            if tier == Tier::Tail {
                rows.push((
                    "    +linked pages".into(),
                    Dimension::Tier,
                    tier.as_str().into(),
                    EvidenceConfig::PlusLinks,
                ));
            }
        }
        for region in Region::ALL {
            if region != Region::Unknown || has_unknown {
                rows.push((region.to_string(), Dimension::Region, region.as_str().into(), EvidenceConfig::OnePage));
            }
        }
        rows.push(("Total".into(), Dimension::Total, "all".into(), EvidenceConfig::OnePage));
        rows.push(("    +search".into(), Dimension::Total, "all".into(), EvidenceConfig::PlusSearch));

        for (lang, cols) in &columns {
            let _ = writeln!(out, "### {}\n", language_name(lang));
            out.push('|');
            for (domain, model) in cols {
                let _ = write!(out, " | {domain} / {model}");
            }
            out.push_str(" |\n|---");
            out.push_str(&"|---:".repeat(cols.len()));
            out.push_str("|\n");
            for (label, dimension, group, config) in &rows {
                let _ = write!(out, "| {label}");
                for (domain, model) in cols {
                    let key = GroupKey {
                        language: lang.to_string(),
                        domain: domain.to_string(),
                        model: model.to_string(),
                        config: *config,
                        dimension: *dimension,
                        group: group.clone(),
                    };
                    match self.groups.get(&key) {
                        Some(s) => {
                            let _ = write!(out, " | {:.2}", s.macro_precision);
                        }
                        None => out.push_str(" | –"),
                    }
                }
                out.push_str(" |\n");
            }
            out.push('\n');
        }
        out
    }
}
