use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A Wikidata item identifier such as `Q4022`.
///
/// Ordering is numeric (`Q2 < Q10`), which gives the total order used for
/// tie-breaking throughout the pipeline.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Qid(u64);

impl Qid {
    pub fn new(n: u64) -> Self {
        Qid(n)
    }

    pub fn number(self) -> u64 {
        self.0
    }

    /// Parses a QID from a bare id (`Q42`) or an entity IRI
    /// (`http://www.wikidata.org/entity/Q42`).
    pub fn from_iri(s: &str) -> Result<Self, Error> {
        let tail = s.rsplit('/').next().unwrap_or(s);
        tail.parse()
    }

    pub fn iri(self) -> String {
        format!("http://www.wikidata.org/entity/Q{}", self.0)
    }
}

impl FromStr for Qid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits =
            s.strip_prefix('Q').ok_or_else(|| Error::validation(format!("malformed QID {s:?}: missing Q prefix")))?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::validation(format!("malformed QID {s:?}")));
        }
        digits.parse().map(Qid).map_err(|_| Error::validation(format!("malformed QID {s:?}")))
    }
}

impl fmt::Display for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

impl fmt::Debug for Qid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

impl Ord for Qid {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for Qid {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for Qid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Qid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
