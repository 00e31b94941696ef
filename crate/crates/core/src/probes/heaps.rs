use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::factuality::is_cjk;
use crate::util::fmt6;

pub const DEFAULT_STRIDE: usize = 1000;
/// Fewer checkpoints than this leave the curve unfitted.
pub const MIN_FIT_POINTS: usize = 10;

/// English: lowercase words split on non-alphanumerics. Chinese: one token
/// per CJK character, with any embedded Latin or digit runs kept whole.
pub fn lexical_tokens(text: &str, language: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let words = lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty());
    if language != "zh" {
        return words.map(str::to_string).collect();
    }
    let mut out = Vec::new();
    for w in words {
        let mut run = String::new();
        for c in w.chars() {
            if is_cjk(c) {
                if !run.is_empty() {
                    out.push(std::mem::take(&mut run));
                }
                out.push(c.to_string());
            } else {
                run.push(c);
            }
        }
        if !run.is_empty() {
            out.push(run);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeapsFit {
    pub k: f64,
    pub beta: f64,
    pub r_squared: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeapsCurve {
    /// (tokens seen, distinct tokens) at every stride and at the end.
    pub points: Vec<(u64, u64)>,
    pub fit: Option<HeapsFit>,
}

/// Vocabulary size after each stride tokens (and after the final token).
pub fn vocab_growth<S: AsRef<str>>(tokens: &[S], stride: usize) -> HeapsCurve {
    let stride = stride.max(1);
    let mut seen: HashSet<&str> = HashSet::new();
    let mut points = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        seen.insert(t.as_ref());
        let n = i + 1;
        if n % stride == 0 || n == tokens.len() {
            points.push((n as u64, seen.len() as u64));
        }
    }
    let fit = fit_heaps(&points);
    HeapsCurve { points, fit }
}

/// Least squares on (ln n, ln V).
pub fn fit_heaps(points: &[(u64, u64)]) -> Option<HeapsFit> {
    if points.len() < MIN_FIT_POINTS {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, v)| (v as f64).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(HeapsFit { k: intercept.exp(), beta, r_squared })
}

impl HeapsCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tokens,vocabulary\n");
        for (n, v) in &self.points {
            let _ = writeln!(out, "{n},{v}");
        }
        out
    }
}

/// A labelled curve for plotting.
pub struct Series<'a> {
    pub label: &'a str,
    pub curve: &'a HeapsCurve,
}

const COLORS: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Line chart of vocabulary size against text length.
pub fn render_svg(title: &str, series: &[Series<'_>]) -> String {
    let (w, h, left, right, top, bottom) = (640.0, 420.0, 70.0, 20.0, 40.0, 50.0);
    let max_n = series.iter().flat_map(|s| s.curve.points.last()).map(|p| p.0).max().unwrap_or(1).max(1) as f64;
    let max_v = series.iter().flat_map(|s| s.curve.points.iter().map(|p| p.1)).max().unwrap_or(1).max(1) as f64;
    let x = |n: f64| left + n / max_n * (w - left - right);
    let y = |v: f64| h - bottom - v / max_v * (h - top - bottom);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ =
        writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<line x1="{left}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{left}" y1="{top}" x2="{left}" y2="{0}" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            x(f * max_n),
            h - bottom + 16.0,
            (f * max_n).round(),
            left - 6.0,
            y(f * max_v) + 4.0,
            (f * max_v).round()
        );
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">tokens</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">unique tokens</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = std::iter::once((0u64, 0u64))
            .chain(s.curve.points.iter().copied())
            .map(|(n, v)| format!("{:.1},{:.1}", x(n as f64), y(v as f64)))
            .collect();
        let _ =
            writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let beta = s.curve.fit.map(|f| format!(" (β={})", fmt6(f.beta))).unwrap_or_default();
        let ly = top + 16.0 * i as f64 + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{2}" y="{3}">{4}{beta}</text>"#,
            left + 12.0,
            left + 32.0,
            left + 38.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counts() {
        let c = vocab_growth(&["a", "b", "a", "c"], 1);
        assert_eq!(c.points, [(1, 1), (2, 2), (3, 2), (4, 3)]);
        assert!(c.fit.is_none());
        let same = vec!["x"; 50];
        assert!(vocab_growth(&same, 5).points.iter().all(|&(_, v)| v == 1));
        let fresh: Vec<String> = (0..200).map(|i| format!("w{i}")).collect();
        let c = vocab_growth(&fresh, 10);
        assert!(c.points.iter().all(|&(n, v)| n == v));
        assert!((c.fit.unwrap().beta - 1.0).abs() < 1e-9);
        assert!((c.fit.unwrap().k - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trailing_partial_checkpoint() {
        let c = vocab_growth(&["a", "b", "c", "d", "e"], 2);
        assert_eq!(c.points, [(2, 2), (4, 4), (5, 5)]);
        assert!(vocab_growth::<&str>(&[], 3).points.is_empty());
    }

    #[test]
    fn tokenizers() {
        assert_eq!(lexical_tokens("The river, the RIVER!", "en"), ["the", "river", "the", "river"]);
        assert_eq!(lexical_tokens("长江全长6300公里。", "zh"), ["长", "江", "全", "长", "6300", "公", "里"]);
    }

    #[test]
    fn natural_text_beta_in_unit_interval() {
        let text = include_str!("../../tests/fixtures/prose_corpus.txt");
        let tokens = lexical_tokens(text, "en");
        assert!(tokens.len() >= 50_000);
        let fit = vocab_growth(&tokens, DEFAULT_STRIDE).fit.unwrap();
        assert!(fit.beta > 0.0 && fit.beta < 1.0, "beta {}", fit.beta);
    }

    #[test]
    fn svg_renders() {
        let c = vocab_growth(&["a", "b", "a"], 1);
        let svg = render_svg("t <x>", &[Series { label: "Head", curve: &c }]);
        assert!(svg.starts_with("<svg") && svg.contains("polyline") && svg.contains("t &lt;x&gt;"));
    }

    proptest! {
        #[test]
        fn curve_invariants(tokens in prop::collection::vec(0u8..20, 0..300), stride in 1usize..7) {
            let toks: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
            let full = vocab_growth(&toks, 1);
            let mut prev = (0u64, 0u64);
            for &(n, v) in &full.points {
                prop_assert!(v <= n);
                prop_assert!(v - prev.1 <= 1 && v >= prev.1);
                prev = (n, v);
            }
            let strided = vocab_growth(&toks, stride);
            for p in &strided.points {
                prop_assert!(full.points.contains(p));
            }
        }
    }
}
