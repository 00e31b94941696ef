//! Lossy wikitext to plain text conversion, used when the API has no
//! plain-text extract for a page.

/// Tags whose content is dropped along with the tag.
const DROP_CONTENT_TAGS: &[&str] = &["ref", "gallery", "math", "timeline", "score", "syntaxhighlight", "references"];

/// Link namespaces that render as media or metadata rather than text.
const DROP_LINK_PREFIXES: &[&str] = &["file", "image", "category", "media", "文件", "图像", "分类", "檔案", "分類"];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stripped {
    pub text: String,
    /// An unterminated template, table, comment or ref was cut to the end of input.
    pub unbalanced: bool,
}

pub fn strip_wikitext(source: &str) -> String {
    strip_wikitext_checked(source).text
}

/// Applies the stripping pass until nothing changes, which makes the result
/// idempotent. Rewrites never lengthen the text, so this settles quickly.
pub fn strip_wikitext_checked(source: &str) -> Stripped {
    let mut current = source.to_string();
    let mut unbalanced = false;
    for _ in 0..MAX_PASSES {
        let (next, flagged) = pass(&current);
        unbalanced |= flagged;
        if next == current {
            break;
        }
        current = next;
    }
    Stripped { text: current, unbalanced }
}

const MAX_PASSES: usize = 256;

fn pass(src: &str) -> (String, bool) {
    let (inline, flagged) = scan(src);
    let decoded = html_escape::decode_html_entities(&inline).replace('\u{a0}', " ");
    (normalize_lines(&decoded), flagged)
}

fn at_line_start(src: &str, i: usize) -> bool {
    src[..i].chars().rev().take_while(|c| *c != '\n').all(|c| c == ' ' || c == '\t')
}

/// Byte index just past the construct opened at `i` by `open` and closed by
/// `close`, honouring nesting; `None` if it never closes.
fn balanced_end(src: &str, i: usize, open: &str, close: &str, line_start_only: bool) -> Option<usize> {
    let mut depth = 0usize;
    let mut j = i;
    while j < src.len() {
        let rest = &src[j..];
        if rest.starts_with(open) && (!line_start_only || at_line_start(src, j)) {
            depth += 1;
            j += open.len();
        } else if rest.starts_with(close) && (!line_start_only || at_line_start(src, j)) {
            depth -= 1;
            j += close.len();
            if depth == 0 {
                return Some(j);
            }
        } else {
            j += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    None
}

fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack.to_ascii_lowercase().find(&needle.to_ascii_lowercase())
}

/// Name and end of an HTML-like tag starting at `i` (which holds `<`).
fn parse_tag(src: &str, i: usize) -> Option<(String, bool, bool, usize)> {
    let rest = &src[i + 1..];
    let (closing, body) = match rest.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, rest),
    };
    if !body.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    let name: String = body.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
    let after = &body[name.len()..];
    if !(after.starts_with('>') || after.starts_with('/') || after.starts_with(char::is_whitespace)) {
        return None;
    }
    let gt = body.find('>')?;
    if body[..gt].contains('<') {
        return None;
    }
    let self_closing = body[..gt].trim_end().ends_with('/');
    let end = i + 1 + usize::from(closing) + gt + 1;
    Some((name.to_ascii_lowercase(), closing, self_closing, end))
}

/// Split `inner` on `|` at nesting depth zero.
fn top_level_pipes(inner: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    let bytes = inner.as_bytes();
    let mut j = 0;
    while j < bytes.len() {
        if inner[j..].starts_with("[[") || inner[j..].starts_with("{{") {
            depth += 1;
            j += 2;
            continue;
        }
        if inner[j..].starts_with("]]") || inner[j..].starts_with("}}") {
            depth -= 1;
            j += 2;
            continue;
        }
        if bytes[j] == b'|' && depth == 0 {
            parts.push(&inner[start..j]);
            start = j + 1;
        }
        j += inner[j..].chars().next().map_or(1, char::len_utf8);
    }
    parts.push(&inner[start..]);
    parts
}

fn rewrite_link(inner: &str) -> String {
    let parts = top_level_pipes(inner);
    let target = parts[0].trim();
    let prefix = target.trim_start_matches(':').split(':').next().unwrap_or("");
    if target.contains(':')
        && !target.starts_with(':')
        && DROP_LINK_PREFIXES.contains(&prefix.trim().to_lowercase().as_str())
    {
        return String::new();
    }
    match parts.last() {
        Some(label) if parts.len() > 1 => label.to_string(),
        _ => target.trim_start_matches(':').to_string(),
    }
}

fn scan(src: &str) -> (String, bool) {
    let mut out = String::with_capacity(src.len());
    let mut flagged = false;
    let mut i = 0;
    while i < src.len() {
        let rest = &src[i..];
        if rest.starts_with("<!--") {
            match rest.find("-->") {
                Some(k) => i += k + 3,
                None => {
                    flagged = true;
                    i = src.len();
                }
            }
            continue;
        }
        if rest.starts_with("{{") {
            match balanced_end(src, i, "{{", "}}", false) {
                Some(end) => i = end,
                None => {
                    flagged = true;
                    i = src.len();
                }
            }
            continue;
        }
        if rest.starts_with("{|") && at_line_start(src, i) {
            match balanced_end(src, i, "{|", "|}", true) {
                Some(end) => i = end,
                None => {
                    flagged = true;
                    i = src.len();
                }
            }
            continue;
        }
        if rest.starts_with("[[") {
            if let Some(end) = balanced_end(src, i, "[[", "]]", false) {
                out.push_str(&rewrite_link(&src[i + 2..end - 2]));
                i = end;
                continue;
            }
        }
        if rest.starts_with('[') && !rest.starts_with("[[") {
            let url_like = ["http://", "https://", "//"].iter().any(|p| rest[1..].starts_with(p));
            if url_like {
                if let Some(k) = rest.find(']').filter(|k| !rest[..*k].contains('\n')) {
                    let inner = &rest[1..k];
                    if let Some((_, label)) = inner.split_once(' ') {
                        out.push_str(label.trim());
                    }
                    i += k + 1;
                    continue;
                }
            }
        }
        if rest.starts_with("''") {
            i += rest.chars().take_while(|c| *c == '\'').count();
            continue;
        }
        if rest.starts_with('<') {
            if let Some((name, closing, self_closing, end)) = parse_tag(src, i) {
                if !closing && !self_closing && DROP_CONTENT_TAGS.contains(&name.as_str()) {
                    let close = format!("</{name}");
                    match find_ci(&src[end..], &close) {
                        Some(k) => {
                            let after = end + k;
                            i = src[after..].find('>').map_or(src.len(), |g| after + g + 1);
                        }
                        None => {
                            flagged = true;
                            i = src.len();
                        }
                    }
                } else {
                    i = end;
                }
                continue;
            }
        }
        if let Some(tail) = rest.strip_prefix("__") {
            let word: String = tail.chars().take_while(|c| c.is_ascii_uppercase()).collect();
            if !word.is_empty() && tail[word.len()..].starts_with("__") {
                i += word.len() + 4;
                continue;
            }
        }
        let c = rest.chars().next().unwrap();
        out.push(c);
        i += c.len_utf8();
    }
    (out, flagged)
}

fn heading_text(line: &str) -> Option<&str> {
    let t = line.trim();
    let lead = t.chars().take_while(|c| *c == '=').count();
    let trail = t.chars().rev().take_while(|c| *c == '=').count();
    if lead >= 2 && trail >= 2 && t.len() > lead + trail {
        Some(t[lead..t.len() - trail].trim())
    } else {
        None
    }
}

/// Headings to bare lines, list markers dropped, whitespace collapsed and
/// runs of blank lines reduced to one.
fn normalize_lines(text: &str) -> String {
    let mut lines: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = match heading_text(raw) {
            Some(h) => h,
            None => raw.trim_start().trim_start_matches(['*', '#', ':', ';']),
        };
        let collapsed = line.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() && lines.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        lines.push(collapsed);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_text_is_unchanged() {
        assert_eq!(strip_wikitext("plain sentence."), "plain sentence.");
    }

    #[test]
    fn links() {
        assert_eq!(strip_wikitext("the [[Rio Grande|river]] flows"), "the river flows");
        assert_eq!(strip_wikitext("the [[Rio Grande]] flows"), "the Rio Grande flows");
        assert_eq!(strip_wikitext("a [[File:X.jpg|thumb|A [[river]] view]] b"), "a b");
        assert_eq!(strip_wikitext("x[[Category:Rivers of Texas]]"), "x");
        assert_eq!(strip_wikitext("see [https://example.org the site]."), "see the site.");
        assert_eq!(strip_wikitext("cite [https://example.org]."), "cite .");
    }

    #[test]
    fn templates_and_refs() {
        assert_eq!(strip_wikitext("fact{{cite web|...}} here"), "fact here");
        assert_eq!(strip_wikitext("a{{outer|{{inner|x}}|y}}b"), "ab");
        assert_eq!(strip_wikitext("long<ref name=\"a\">{{cite|x}}</ref> river"), "long river");
        assert_eq!(strip_wikitext("long<ref name=\"a\" /> river"), "long river");
        assert_eq!(strip_wikitext("a <small>b</small> c<br/>d"), "a b cd");
        assert_eq!(strip_wikitext("a<!-- hidden -->b"), "ab");
    }

    #[test]
    fn formatting_and_structure() {
        assert_eq!(strip_wikitext("'''Yangtze''' is ''long''"), "Yangtze is long");
        assert_eq!(strip_wikitext("intro\n\n== Course ==\nIt flows."), "intro\n\nCourse\nIt flows.");
        assert_eq!(strip_wikitext("* one\n* two"), "one\ntwo");
        assert_eq!(strip_wikitext("a &amp; b&nbsp;c"), "a & b c");
        assert_eq!(strip_wikitext("x\n{| class=\"wikitable\"\n|-\n| a || b\n|}\ny"), "x\n\ny");
        assert_eq!(strip_wikitext("__NOTOC__text"), "text");
    }

    #[test]
    fn unbalanced_is_flagged() {
        let s = strip_wikitext_checked("kept {{infobox river\n| length = 5");
        assert_eq!(s.text, "kept");
        assert!(s.unbalanced);
        assert!(!strip_wikitext_checked("fine").unbalanced);
    }

    #[test]
    fn decoded_markup_is_stripped_to_fixpoint() {
        let once = strip_wikitext("a &lt;ref&gt;x&lt;/ref&gt; b");
        assert_eq!(once, "a b");
        assert_eq!(strip_wikitext(&once), once);
    }

    fn wikitext_fragment() -> impl Strategy<Value = String> {
        let atoms = prop::sample::select(vec![
            "{{",
            "}}",
            "[[",
            "]]",
            "|",
            "{|",
            "|}",
            "\n",
            "\n\n",
            "''",
            "'''",
            "<ref>",
            "</ref>",
            "<ref/>",
            "<b>",
            "</b>",
            "<!--",
            "-->",
            "== ",
            " ==",
            "* ",
            "#",
            "&amp;",
            "&lt;",
            "&gt;",
            "[http://x y]",
            "File:",
            "Category:",
            "river",
            " ",
            "长江",
            "=",
            ":",
            "<",
            ">",
            "[",
            "]",
            "__TOC__",
        ]);
        prop::collection::vec(atoms, 0..40).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn idempotent_and_shrinking(s in wikitext_fragment()) {
            let once = strip_wikitext(&s);
            prop_assert!(once.chars().count() <= s.chars().count());
            prop_assert_eq!(strip_wikitext(&once), once);
        }

        #[test]
        fn arbitrary_text(s in "\\PC{0,200}") {
            let once = strip_wikitext(&s);
            prop_assert!(once.chars().count() <= s.chars().count());
            prop_assert_eq!(strip_wikitext(&once), once);
        }
    }
}
