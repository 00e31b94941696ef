use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qid::Qid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Head,
    Torso,
    Tail,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Head, Tier::Torso, Tier::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Head => "Head",
            Tier::Torso => "Torso",
            Tier::Tail => "Tail",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown tier {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierBoundary {
    pub head_size: usize,
    pub torso_size: usize,
    pub tail_size: usize,
    pub total: u128,
    /// Cumulative share of the metric at the end of Head.
    pub head_share: f64,
    /// Cumulative share at the end of Torso.
    pub head_torso_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub qid: Qid,
    pub value: u64,
    pub tier: Tier,
    /// 1-based position in the descending order.
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TierAssignment {
    pub metric: String,
    pub ranking: Vec<RankedEntity>,
    pub boundary: TierBoundary,
}

impl TierAssignment {
    pub fn tier_of(&self, qid: Qid) -> Option<Tier> {
        // ranking is small enough in practice; callers needing many lookups use `map`
        self.ranking.iter().find(|r| r.qid == qid).map(|r| r.tier)
    }

    pub fn map(&self) -> BTreeMap<Qid, Tier> {
        self.ranking.iter().map(|r| (r.qid, r.tier)).collect()
    }

    pub fn members(&self, tier: Tier) -> impl Iterator<Item = &RankedEntity> {
        self.ranking.iter().filter(move |r| r.tier == tier)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("qid,value,tier,rank\n");
        for r in &self.ranking {
            out.push_str(&format!("{},{},{},{}\n", r.qid, r.value, r.tier, r.rank));
        }
        out
    }

    pub fn from_csv(metric: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("qid,value,tier,rank") {
            return Err(Error::Load("tier file: unexpected header".into()));
        }
        let mut entities = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(Error::Load(format!("tier file: bad row {line:?}")));
            }
            let value = cols[1].parse().map_err(|_| Error::Load(format!("tier file: bad value {line:?}")))?;
            entities.push((cols[0].parse()?, value));
        }
        partition_tiers(&entities, metric)
    }
}

/// Splits entities into tiers holding a third of the metric each.
///
/// Entities are sorted by value descending, ties by ascending QID. Head is
/// the shortest prefix whose cumulative sum reaches a third of the total;
/// Head plus Torso the shortest prefix reaching two thirds. All integer
/// arithmetic, so the result is exact and scale-invariant.
pub fn partition_tiers(entities: &[(Qid, u64)], metric: &str) -> Result<TierAssignment> {
    let mut sorted: Vec<(Qid, u64)> = entities.to_vec();
    sorted.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    if has_duplicates(&sorted) {
        return Err(Error::validation("duplicate QID in tier input"));
    }
    let total: u128 = sorted.iter().map(|(_, v)| *v as u128).sum();
    if total == 0 {
        return Err(Error::validation(format!("metric {metric} is zero for every entity; cannot partition")));
    }

    let mut ranking = Vec::with_capacity(sorted.len());
    let mut cum: u128 = 0;
    let mut head_end = None;
    let mut torso_end = None;
    for (i, (qid, value)) in sorted.iter().enumerate() {
        let tier = if head_end.is_none() {
            Tier::Head
        } else if torso_end.is_none() {
            Tier::Torso
        } else {
            Tier::Tail
        };
        cum += *value as u128;
        if head_end.is_none() && 3 * cum >= total {
            head_end = Some((i + 1, cum));
        }
        if head_end.is_some() && torso_end.is_none() && 3 * cum >= 2 * total {
            torso_end = Some((i + 1, cum));
        }
        ranking.push(RankedEntity { qid: *qid, value: *value, tier, rank: i + 1 });
    }
    let (head_size, head_cum) = head_end.expect("total > 0 reaches a third");
    let (torso_to, torso_cum) = torso_end.expect("total > 0 reaches two thirds");
    let boundary = TierBoundary {
        head_size,
        torso_size: torso_to - head_size,
        tail_size: sorted.len() - torso_to,
        total,
        head_share: head_cum as f64 / total as f64,
        head_torso_share: torso_cum as f64 / total as f64,
    };
    Ok(TierAssignment { metric: metric.to_string(), ranking, boundary })
}

fn has_duplicates(sorted: &[(Qid, u64)]) -> bool {
    let mut ids: Vec<Qid> = sorted.iter().map(|(q, _)| *q).collect();
    ids.sort();
    ids.windows(2).any(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ents(values: &[u64]) -> Vec<(Qid, u64)> {
        values.iter().enumerate().map(|(i, v)| (Qid::new(i as u64 + 1), *v)).collect()
    }

    /// Independent oracle: walk the sorted values and find the boundaries.
    fn oracle(values: &[u64]) -> (usize, usize) {
        let mut v = values.to_vec();
        v.sort_by(|a, b| b.cmp(a));
        let total: f64 = v.iter().map(|x| *x as f64).sum();
        let mut cum = 0.0;
        let mut head = None;
        let mut both = None;
        for (i, x) in v.iter().enumerate() {
            cum += *x as f64;
            if head.is_none() && cum >= total / 3.0 {
                head = Some(i + 1);
            }
            if both.is_none() && cum >= 2.0 * total / 3.0 {
                both = Some(i + 1);
            }
        }
        let h = head.unwrap();
        (h, both.unwrap() - h)
    }

    #[test]
    fn worked_example() {
        let t = partition_tiers(&ents(&[60, 15, 15, 6, 2, 1, 1]), "views").unwrap();
        assert_eq!(oracle(&[60, 15, 15, 6, 2, 1, 1]), (1, 1));
        assert_eq!(t.boundary.head_size, 1);
        assert_eq!(t.boundary.torso_size, 1);
        assert_eq!(t.boundary.tail_size, 5);
        assert_eq!(t.tier_of(Qid::new(1)), Some(Tier::Head));
        assert_eq!(t.tier_of(Qid::new(2)), Some(Tier::Torso));
        assert_eq!(t.tier_of(Qid::new(3)), Some(Tier::Tail));
        assert!((t.boundary.head_share - 0.60).abs() < 1e-12);
        assert!((t.boundary.head_torso_share - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_entity_is_head() {
        let t = partition_tiers(&ents(&[5]), "views").unwrap();
        assert_eq!((t.boundary.head_size, t.boundary.torso_size, t.boundary.tail_size), (1, 0, 0));
    }

    #[test]
    fn all_zero_rejected() {
        assert!(partition_tiers(&ents(&[0, 0, 0]), "views").is_err());
        assert!(partition_tiers(&[], "views").is_err());
    }

    #[test]
    fn duplicates_rejected() {
        let e = vec![(Qid::new(1), 5), (Qid::new(1), 6)];
        assert!(partition_tiers(&e, "views").is_err());
    }

    #[test]
    fn ties_broken_by_qid() {
        let e = vec![(Qid::new(9), 10), (Qid::new(3), 10), (Qid::new(5), 10)];
        let t = partition_tiers(&e, "views").unwrap();
        let order: Vec<_> = t.ranking.iter().map(|r| r.qid.number()).collect();
        assert_eq!(order, vec![3, 5, 9]);
        assert_eq!(t.tier_of(Qid::new(3)), Some(Tier::Head));
        assert_eq!(t.tier_of(Qid::new(5)), Some(Tier::Torso));
        assert_eq!(t.tier_of(Qid::new(9)), Some(Tier::Tail));
    }

    #[test]
    fn csv_round_trip() {
        let t = partition_tiers(&ents(&[60, 15, 15, 6, 2, 1, 1]), "views").unwrap();
        let back = TierAssignment::from_csv("views", &t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn matches_oracle(values in prop::collection::vec(0u64..1_000, 1..200)) {
            prop_assume!(values.iter().any(|v| *v > 0));
            let t = partition_tiers(&ents(&values), "m").unwrap();
            prop_assert_eq!((t.boundary.head_size, t.boundary.torso_size), oracle(&values));
        }

        #[test]
        fn minimal_prefixes(values in prop::collection::vec(0u64..10_000, 1..300)) {
            prop_assume!(values.iter().any(|v| *v > 0));
            let t = partition_tiers(&ents(&values), "m").unwrap();
            let total = t.boundary.total;
            let prefix = |k: usize| -> u128 { t.ranking[..k].iter().map(|r| r.value as u128).sum() };
            let h = t.boundary.head_size;
            let ht = h + t.boundary.torso_size;
            prop_assert!(3 * prefix(h) >= total);
            prop_assert!(3 * prefix(h - 1) < total);
            prop_assert!(3 * prefix(ht) >= 2 * total);
            prop_assert!(3 * prefix(ht - 1) < 2 * total);
            // ranking is non-increasing
            prop_assert!(t.ranking.windows(2).all(|w| w[0].value >= w[1].value));
        }

        #[test]
        fn scale_invariant(values in prop::collection::vec(0u64..10_000, 1..100), c in 1u64..1000) {
            prop_assume!(values.iter().any(|v| *v > 0));
            let a = partition_tiers(&ents(&values), "m").unwrap();
            let scaled: Vec<u64> = values.iter().map(|v| v * c).collect();
            let b = partition_tiers(&ents(&scaled), "m").unwrap();
            prop_assert_eq!(a.map(), b.map());
        }

        #[test]
        fn permutation_invariant(values in prop::collection::vec(0u64..100, 1..100), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            prop_assume!(values.iter().any(|v| *v > 0));
            let e = ents(&values);
            let mut shuffled = e.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(partition_tiers(&e, "m").unwrap(), partition_tiers(&shuffled, "m").unwrap());
        }

        #[test]
        fn head_share_bound(values in prop::collection::vec(1u64..10_000, 3..300)) {
            let t = partition_tiers(&ents(&values), "m").unwrap();
            let total = t.boundary.total as f64;
            let s_max = *values.iter().max().unwrap() as f64 / total;
            let head = t.boundary.head_share;
            let torso = t.boundary.head_torso_share - head;
            prop_assert!(head >= 1.0 / 3.0 && head < 1.0 / 3.0 + s_max + 1e-12);
            if t.boundary.torso_size > 0 {
                prop_assert!(torso > 1.0 / 3.0 - s_max - 1e-12 && torso < 1.0 / 3.0 + s_max + 1e-12);
            }
        }
    }
}
