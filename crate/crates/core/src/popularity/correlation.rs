use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qid::Qid;
use crate::util::fmt6;
use crate::wikistats::PopularityProfile;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMethod {
    #[default]
    Spearman,
    PearsonLog,
}

impl fmt::Display for CorrelationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationMethod::Spearman => "spearman",
            CorrelationMethod::PearsonLog => "pearson_log",
        })
    }
}

impl FromStr for CorrelationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" => Ok(CorrelationMethod::Spearman),
            "pearson_log" | "pearson-log" => Ok(CorrelationMethod::PearsonLog),
            other => Err(Error::config(format!("unknown correlation method {other:?}"))),
        }
    }
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn correlate(a: &[f64], b: &[f64], method: CorrelationMethod) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::validation(format!("need at least 3 paired values, got {}", a.len())));
    }
    if a.iter().chain(b).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::validation("metric values must be finite and non-negative"));
    }
    match method {
        CorrelationMethod::Spearman => pearson(&average_ranks(a), &average_ranks(b)),
        CorrelationMethod::PearsonLog => {
            let la: Vec<f64> = a.iter().map(|v| v.ln_1p()).collect();
            let lb: Vec<f64> = b.iter().map(|v| v.ln_1p()).collect();
            pearson(&la, &lb)
        }
    }
}

/// One named metric over the entities that have it.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricColumn {
    pub name: String,
    pub values: BTreeMap<Qid, f64>,
}

/// Extracts the standard proxy battery: per-language pageviews, inlinks,
/// edits and page length, plus the Wikidata triple count.
pub fn profile_metrics(profiles: &[PopularityProfile], languages: &[String]) -> Vec<MetricColumn> {
    type Getter = fn(&crate::wikistats::LanguageSignals) -> u64;
    let per_lang: [(&str, Getter); 4] = [
        ("pageviews", |s| s.pageviews),
        ("inlinks", |s| s.inlinks),
        ("edits", |s| s.edits),
        ("length", |s| s.page_length_chars),
    ];
    let mut cols = Vec::new();
    for (metric, get) in per_lang {
        for lang in languages {
            let values = profiles.iter().filter_map(|p| p.lang(lang).map(|s| (p.qid, get(s) as f64))).collect();
            cols.push(MetricColumn { name: format!("{lang}_{metric}"), values });
        }
    }
    cols.push(MetricColumn {
        name: "triples".into(),
        values: profiles.iter().map(|p| (p.qid, p.triple_count as f64)).collect(),
    });
    cols
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub class: String,
    pub method: CorrelationMethod,
    pub metrics: Vec<String>,
    /// `None` where the pair had too few common entities or a constant column.
    pub matrix: Vec<Vec<Option<f64>>>,
    pub pair_counts: Vec<Vec<usize>>,
}

impl CorrelationReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.metrics.iter().position(|m| m == a)?;
        let j = self.metrics.iter().position(|m| m == b)?;
        self.matrix[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("metric,{}\n", self.metrics.join(","));
        for (name, row) in self.metrics.iter().zip(&self.matrix) {
            let cells: Vec<String> = row.iter().map(|c| c.map(fmt6).unwrap_or_default()).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }
}

/// Pairwise correlations over the intersection of entities having both metrics.
pub fn correlation_matrix(class: &str, columns: &[MetricColumn], method: CorrelationMethod) -> CorrelationReport {
    let k = columns.len();
    let mut matrix = vec![vec![None; k]; k];
    let mut pair_counts = vec![vec![0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b): (Vec<f64>, Vec<f64>) =
                columns[i].values.iter().filter_map(|(q, va)| columns[j].values.get(q).map(|vb| (*va, *vb))).unzip();
            pair_counts[i][j] = a.len();
            pair_counts[j][i] = a.len();
            let r = match correlate(&a, &b, method) {
                Ok(_) if i == j => Some(1.0),
                Ok(r) => Some(r),
                Err(e) => {
                    log::debug!("{class}: {} vs {}: {e}", columns[i].name, columns[j].name);
                    None
                }
            };
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    CorrelationReport {
        class: class.to_string(),
        method,
        metrics: columns.iter().map(|c| c.name.clone()).collect(),
        matrix,
        pair_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Classic rank-difference formula, valid when there are no ties.
    fn spearman_oracle(a: &[f64], b: &[f64]) -> f64 {
        let rank =
            |v: &[f64]| -> Vec<f64> { v.iter().map(|x| 1.0 + v.iter().filter(|y| *y < x).count() as f64).collect() };
        let (ra, rb) = (rank(a), rank(b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y) * (x - y)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn self_correlation() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert!((correlate(&a, &a, CorrelationMethod::Spearman).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlate(&a, &a, CorrelationMethod::PearsonLog).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_inverse() {
        let r = correlate(&[1.0, 2.0, 3.0, 4.0], &[8.0, 6.0, 4.0, 2.0], CorrelationMethod::Spearman).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapped_pair() {
        let (a, b) = ([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]);
        assert!((spearman_oracle(&a, &b) - 0.5).abs() < 1e-12);
        let r = correlate(&a, &b, CorrelationMethod::Spearman).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn constant_is_undefined() {
        let e = correlate(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0], CorrelationMethod::Spearman).unwrap_err();
        assert!(matches!(e, Error::UndefinedCorrelation(_)));
    }

    #[test]
    fn too_short_or_mismatched() {
        assert!(correlate(&[1.0, 2.0], &[1.0, 2.0], CorrelationMethod::Spearman).is_err());
        assert!(correlate(&[1.0, 2.0, 3.0], &[1.0, 2.0], CorrelationMethod::Spearman).is_err());
    }

    #[test]
    fn pearson_log_matches_hand_computation() {
        // log1p of e^k - 1 is exactly k, so this reduces to plain Pearson on 0,1,2 vs 0,2,1
        let e = std::f64::consts::E;
        let a = [0.0, e - 1.0, e * e - 1.0];
        let b = [0.0, e * e - 1.0, e - 1.0];
        let r = correlate(&a, &b, CorrelationMethod::PearsonLog).unwrap();
        assert!((r - 0.5).abs() < 1e-9);
    }

    #[test]
    fn matrix_uses_intersection() {
        let col = |name: &str, vals: &[(u64, f64)]| MetricColumn {
            name: name.into(),
            values: vals.iter().map(|(q, v)| (Qid::new(*q), *v)).collect(),
        };
        let cols = vec![
            col("a", &[(1, 1.0), (2, 2.0), (3, 3.0), (4, 4.0)]),
            col("b", &[(1, 1.0), (2, 3.0), (3, 2.0)]),
            col("c", &[(1, 5.0), (2, 5.0), (3, 5.0)]),
        ];
        let rep = correlation_matrix("rivers", &cols, CorrelationMethod::Spearman);
        assert_eq!(rep.pair_counts[0][1], 3);
        assert!((rep.get("a", "b").unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(rep.get("b", "a"), rep.get("a", "b"));
        assert_eq!(rep.get("a", "a"), Some(1.0));
        assert_eq!(rep.get("a", "c"), None);
        assert!(rep.to_csv().starts_with("metric,a,b,c\na,1.000000,0.500000,\n"));
    }

    proptest! {
        #[test]
        fn spearman_matches_formula_without_ties(perm in Just((0..12).collect::<Vec<u32>>()).prop_shuffle()) {
            let a: Vec<f64> = (0..12).map(|i| i as f64).collect();
            let b: Vec<f64> = perm.iter().map(|i| *i as f64).collect();
            let r = correlate(&a, &b, CorrelationMethod::Spearman).unwrap();
            prop_assert!((r - spearman_oracle(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn bounded_and_symmetric(a in prop::collection::vec(0.0f64..1e6, 3..50), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = a.iter().map(|_| rng.random_range(0.0..1e6)).collect();
            for m in [CorrelationMethod::Spearman, CorrelationMethod::PearsonLog] {
                if let Ok(r) = correlate(&a, &b, m) {
                    prop_assert!((-1.0..=1.0).contains(&r));
                    prop_assert_eq!(Some(r), correlate(&b, &a, m).ok());
                }
            }
        }
    }
}
