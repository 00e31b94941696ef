use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qid::Qid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    Africa,
    Americas,
    /// Asia, Australia and Oceania.
    #[serde(rename = "AAO")]
    Aao,
    Europe,
    Unknown,
}

impl Region {
    /// Fixed order used for round-robin sampling and report rows.
    pub const ALL: [Region; 5] = [Region::Africa, Region::Americas, Region::Aao, Region::Europe, Region::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Africa => "Africa",
            Region::Americas => "Americas",
            Region::Aao => "AAO",
            Region::Europe => "Europe",
            Region::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown region {s:?}")))
    }
}

/// Country QID to region lookup loaded from a TOML file of the form
/// `Europe = ["Q183", ...]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegionTable {
    map: BTreeMap<Qid, Region>,
}

const SHIPPED: &str = include_str!("../../data/regions.toml");

impl RegionTable {
    pub fn shipped() -> Self {
        Self::from_toml(SHIPPED).expect("shipped region table parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> =
            toml::from_str(text).map_err(|e| Error::config(format!("region table: {e}")))?;
        let mut map = BTreeMap::new();
        for (region, qids) in raw {
            let region: Region = region.parse()?;
            if region == Region::Unknown {
                return Err(Error::config("region table cannot map to Unknown"));
            }
            for q in qids {
                let qid: Qid = q.parse()?;
                if let Some(prev) = map.insert(qid, region) {
                    if prev != region {
                        return Err(Error::config(format!("{qid} mapped to both {prev} and {region}")));
                    }
                }
            }
        }
        Ok(RegionTable { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, qid: Qid) -> Option<Region> {
        self.map.get(&qid).copied()
    }

    pub fn insert(&mut self, qid: Qid, region: Region) {
        self.map.insert(qid, region);
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Qid, Region)> + '_ {
        self.map.iter().map(|(q, r)| (*q, *r))
    }
}

/// The first location present in the table wins; none present gives `Unknown`.
pub fn resolve_region(location_qids: &[Qid], table: &RegionTable) -> Region {
    location_qids.iter().find_map(|q| table.get(*q)).unwrap_or(Region::Unknown)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Qid {
        s.parse().unwrap()
    }

    #[test]
    fn shipped_table_lookups() {
        let t = RegionTable::shipped();
        assert_eq!(resolve_region(&[q("Q183")], &t), Region::Europe);
        assert_eq!(resolve_region(&[], &t), Region::Unknown);
        assert_eq!(resolve_region(&[q("Q999999999"), q("Q30")], &t), Region::Americas);
    }

    #[test]
    fn first_mapped_wins() {
        let t = RegionTable::shipped();
        assert_eq!(resolve_region(&[q("Q142"), q("Q30")], &t), Region::Europe);
        assert_eq!(resolve_region(&[q("Q30"), q("Q142")], &t), Region::Americas);
    }

    #[test]
    fn rejects_conflicting_entries() {
        let err = RegionTable::from_toml("Europe = [\"Q1\"]\nAfrica = [\"Q1\"]\n");
        assert!(err.is_err());
    }

    #[test]
    fn region_serde_names() {
        assert_eq!(serde_json::to_string(&Region::Aao).unwrap(), "\"AAO\"");
        assert_eq!("aao".parse::<Region>().unwrap(), Region::Aao);
    }
}
