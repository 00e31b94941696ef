use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::popularity::Tier;
use crate::qid::Qid;
use crate::util::{char_offset, fmt6};

pub const KM_PER_MILE: f64 = 1.609_344;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Km,
    Mile,
    M,
}

impl LengthUnit {
    pub fn km_factor(self) -> f64 {
        match self {
            LengthUnit::Km => 1.0,
            LengthUnit::Mile => KM_PER_MILE,
            LengthUnit::M => 0.001,
        }
    }

    fn parse(token: &str) -> Option<Self> {
        Some(match token.to_lowercase().as_str() {
            "km" | "kilometre" | "kilometres" | "kilometer" | "kilometers" | "公里" | "千米" => LengthUnit::Km,
            "mi" | "mile" | "miles" | "英里" => LengthUnit::Mile,
            "m" | "metre" | "metres" | "meter" | "meters" | "米" => LengthUnit::M,
            _ => return None,
        })
    }
}

pub fn km_to_miles(km: f64) -> f64 {
    km / KM_PER_MILE
}

pub fn miles_to_km(miles: f64) -> f64 {
    miles * KM_PER_MILE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthMention {
    pub value: f64,
    pub unit: LengthUnit,
    /// Character offsets of the whole match (number through unit).
    pub offset: usize,
    pub end: usize,
    pub normalized_km: f64,
    pub text: String,
}

static MENTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\d{1,3}(?:[,，]\d{3})+|\d+)(\.\d+)?(?:\s|-)?(kilometres|kilometers|kilometre|kilometer|km|miles|mile|mi|metres|meters|metre|meter|m|公里|千米|英里|米)",
    )
    .unwrap()
});

/// Number-plus-unit mentions in order of appearance. `language` is accepted
/// for symmetry with the other text functions; the pattern covers both
/// English and Chinese units.
pub fn extract_length_mentions(text: &str, _language: &str) -> Vec<LengthMention> {
    let mut out = Vec::new();
    for c in MENTION.captures_iter(text) {
        let whole = c.get(0).unwrap();
        // Latin units must end at a word boundary ("5 miners" is not a length),
        // and the number must not continue a longer token.
        let unit = c.get(3).unwrap();
        let unit_is_latin = unit.as_str().is_ascii();
        let next = text[whole.end()..].chars().next();
        if unit_is_latin && next.is_some_and(|ch| ch.is_alphanumeric()) {
            continue;
        }
        let prev = text[..whole.start()].chars().next_back();
        if prev.is_some_and(|ch| ch.is_ascii_alphanumeric() || ch == '.') {
            continue;
        }
        let digits: String = c[1].chars().filter(char::is_ascii_digit).collect();
        let number = format!("{digits}{}", c.get(2).map_or("", |m| m.as_str()));
        let Ok(value) = number.parse::<f64>() else { continue };
        let Some(unit) = LengthUnit::parse(unit.as_str()) else { continue };
        if value <= 0.0 {
            continue;
        }
        out.push(LengthMention {
            value,
            unit,
            offset: char_offset(text, whole.start()),
            end: char_offset(text, whole.end()),
            normalized_km: value * unit.km_factor(),
            text: whole.as_str().to_string(),
        });
    }
    out
}

const CUES: [&str; 5] = ["length", "long", "stretches", "flows for", "全长"];

/// Character spans of cue words; Latin cues must stand as whole words.
fn cue_spans(text: &str) -> Vec<(usize, usize)> {
    let lower = text.to_lowercase();
    if lower.len() != text.len() {
        // Lowercasing changed byte lengths; fall back to the original text.
        return cue_spans_in(text, text);
    }
    cue_spans_in(&lower, text)
}

fn cue_spans_in(haystack: &str, original: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    for cue in CUES {
        for (start, m) in haystack.match_indices(cue) {
            let end = start + m.len();
            if cue.is_ascii() {
                let before = haystack[..start].chars().next_back();
                let after = haystack[end..].chars().next();
                if before.is_some_and(char::is_alphanumeric) || after.is_some_and(char::is_alphanumeric) {
                    continue;
                }
            }
            spans.push((char_offset(original, start), char_offset(original, end)));
        }
    }
    spans
}

/// The mention closest to a length cue, or the first mention when the text
/// has no cue. Ties go to the earlier mention.
pub fn select_candidate<'a>(mentions: &'a [LengthMention], text: &str) -> Option<&'a LengthMention> {
    let cues = cue_spans(text);
    if cues.is_empty() {
        return mentions.first();
    }
    let distance = |m: &LengthMention| {
        cues.iter()
            .map(|&(s, e)| if e <= m.offset { m.offset - e } else { s.saturating_sub(m.end) })
            .min()
            .unwrap_or(usize::MAX)
    };
    mentions.iter().min_by_key(|m| distance(m))
}

/// Length in km stated by `text`, if any.
pub fn detect_length_km(text: &str, language: &str) -> Option<f64> {
    let mentions = extract_length_mentions(text, language);
    select_candidate(&mentions, text).map(|m| m.normalized_km)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub rmse_km: f64,
    pub mape_pct: f64,
}

/// RMSE and MAPE over (predicted, true) pairs; `None` for an empty set.
/// Pairs with a non-positive truth are ignored.
pub fn aggregate_errors(pairs: &[(f64, f64)]) -> Option<ErrorSummary> {
    let usable: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, t)| t > 0.0).collect();
    if usable.is_empty() {
        return None;
    }
    let n = usable.len() as f64;
    let mse = usable.iter().map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let mape = usable.iter().map(|(p, t)| 100.0 * (p - t).abs() / t).sum::<f64>() / n;
    Some(ErrorSummary { count: usable.len(), rmse_km: mse.sqrt(), mape_pct: mape })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeCheck {
    pub qid: Qid,
    pub tier: Tier,
    pub model: String,
    pub predicted_km: Option<f64>,
    pub true_km: Option<f64>,
    pub abs_error_km: Option<f64>,
    pub pct_error: Option<f64>,
    /// Length stated on the entity's Wikipedia page.
    pub wikipedia_km: Option<f64>,
    /// Wikidata and Wikipedia differ by more than the tolerance.
    pub disagreement: bool,
    /// The Wikidata value was replaced from the corrections file.
    pub corrected: bool,
}

/// Relative difference above which Wikidata and Wikipedia are said to disagree.
pub const DISAGREEMENT_TOLERANCE: f64 = 0.1;

impl AttributeCheck {
    pub fn new(
        qid: Qid,
        tier: Tier,
        model: &str,
        predicted_km: Option<f64>,
        wikidata_km: Option<f64>,
        wikipedia_km: Option<f64>,
        correction: Option<f64>,
    ) -> Self {
        let true_km = correction.or(wikidata_km).filter(|t| *t > 0.0);
        let disagreement = match (wikidata_km, wikipedia_km) {
            (Some(d), Some(p)) => (d - p).abs() > DISAGREEMENT_TOLERANCE * d.abs().max(p.abs()),
            _ => false,
        };
        let (abs_error_km, pct_error) = match (predicted_km, true_km) {
            (Some(p), Some(t)) => (Some((p - t).abs()), Some(100.0 * (p - t).abs() / t)),
            _ => (None, None),
        };
        AttributeCheck {
            qid,
            tier,
            model: model.to_string(),
            predicted_km,
            true_km,
            abs_error_km,
            pct_error,
            wikipedia_km,
            disagreement,
            corrected: correction.is_some(),
        }
    }

    pub fn pair(&self) -> Option<(f64, f64)> {
        Some((self.predicted_km?, self.true_km?))
    }
}

/// `qid,length_km` overrides for known-bad Wikidata values.
pub fn read_corrections(path: &Path) -> Result<BTreeMap<Qid, f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("qid")) {
            continue;
        }
        let bad = || Error::Load(format!("{}:{}: expected `qid,length_km`", path.display(), i + 1));
        let (q, km) = line.split_once(',').ok_or_else(bad)?;
        let qid: Qid = q.trim().parse().map_err(|_| bad())?;
        let km: f64 = km.trim().parse().map_err(|_| bad())?;
        out.insert(qid, km);
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt6).unwrap_or_default()
}

pub fn checks_csv(checks: &[AttributeCheck]) -> String {
    let mut out = String::from(
        "qid,model,tier,predicted_km,true_km,abs_error_km,pct_error,wikipedia_km,disagreement,corrected\n",
    );
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            c.qid,
            c.model,
            c.tier,
            opt(c.predicted_km),
            opt(c.true_km),
            opt(c.abs_error_km),
            opt(c.pct_error),
            opt(c.wikipedia_km),
            c.disagreement,
            c.corrected
        );
    }
    out
}

/// Per (model, tier) error summary; tiers without usable pairs are omitted.
pub fn summarize_checks(checks: &[AttributeCheck]) -> Vec<(String, Tier, ErrorSummary)> {
    let mut groups: BTreeMap<(String, Tier), Vec<(f64, f64)>> = BTreeMap::new();
    for c in checks {
        if let Some(pair) = c.pair() {
            groups.entry((c.model.clone(), c.tier)).or_default().push(pair);
        }
    }
    groups.into_iter().filter_map(|((m, t), pairs)| aggregate_errors(&pairs).map(|s| (m, t, s))).collect()
}

pub fn summary_markdown(rows: &[(String, Tier, ErrorSummary)]) -> String {
    let mut out = String::from("| Model | Tier | # | RMSE (km) | MAPE |\n|---|---|---:|---:|---:|\n");
    let mut last = "";
    for (model, tier, s) in rows {
        let shown = if model == last { "" } else { model.as_str() };
        last = model;
        let _ = writeln!(out, "| {shown} | {tier} | {} | {:.0} | {:.2} |", s.count, s.rmse_km, s.mape_pct);
    }
    out
}
