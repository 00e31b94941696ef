/// Lowercased tokens (without the dot) that do not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "st", "mt", "ft", "jr", "sr", "vs", "etc", "e.g", "i.e", "approx", "ca", "no",
    "inc", "ltd", "co", "corp", "u.s", "u.k", "gen", "col", "lt", "sgt", "rev", "fig", "vol", "est",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '”', '’', '」', '』', '）'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？')
}

fn is_cjk_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？')
}

fn guarded(before: &str) -> bool {
    let word = before.rsplit(|c: char| c.is_whitespace() || c == '(' || c == '"').next().unwrap_or("").to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Splits on `.`, `!`, `?` and their full-width forms. Western terminators
/// need following whitespace or end of text; a dot after a known
/// abbreviation is not a boundary when `language` is English.
pub fn split_sentences(text: &str, language: &str) -> Vec<String> {
    let english = language.starts_with("en");
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        let mut cjk = is_cjk_terminator(c);
        while j < chars.len() && (is_terminator(chars[j].1) || CLOSERS.contains(&chars[j].1)) {
            cjk |= is_cjk_terminator(chars[j].1);
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
        let at_break = j == chars.len() || chars[j].1.is_whitespace() || cjk;
        let abbreviation = english && c == '.' && j == i + 1 && guarded(&text[start..pos]);
        if at_break && !abbreviation {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = end;
        }
        i = j;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

pub fn count_sentences(text: &str, language: &str) -> usize {
    split_sentences(text, language).len()
}
