pub const DEFAULT_MIN_PARAGRAPH_CHARS: usize = 40;

/// Splits on blank lines. Blocks shorter than `min_chars` are merged into
/// the following block, or into the preceding one at the end of the text.
pub fn segment_paragraphs(text: &str, min_chars: usize) -> Vec<String> {
    let mut blocks: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n").trim().to_string());
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n").trim().to_string());
    }

    let mut out: Vec<String> = Vec::new();
    let mut buf = String::new();
    for block in blocks {
        if !buf.is_empty() {
            buf.push('\n');
        }
        buf.push_str(&block);
        if buf.chars().count() >= min_chars {
            out.push(std::mem::take(&mut buf));
        }
    }
    if !buf.is_empty() {
        match out.last_mut() {
            Some(last) => {
                last.push('\n');
                last.push_str(&buf);
            }
            None => out.push(buf),
        }
    }
    out
}

/// Treats every non-empty line as its own block. Plain-text extracts mark
/// paragraphs with single line breaks, which the blank-line rule would
/// otherwise fuse into one giant paragraph.
pub fn line_blocks(text: &str) -> String {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join("\n\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_block_merges_forward() {
        assert_eq!(segment_paragraphs("A\n\nB", 40), vec!["A\nB"]);
    }

    #[test]
    fn basic_cases() {
        assert!(segment_paragraphs("", 40).is_empty());
        assert!(segment_paragraphs("  \n\n ", 40).is_empty());
        let long = "x".repeat(100);
        assert_eq!(segment_paragraphs(&long, 40), vec![long.clone()]);
        let heading_then_body = format!("Course\n\n{long}\n\n{long}\n\ntail");
        assert_eq!(
            segment_paragraphs(&heading_then_body, 40),
            vec![format!("Course\n{long}"), format!("{long}\ntail")]
        );
    }

    #[test]
    fn line_blocks_splits_single_breaks() {
        assert_eq!(line_blocks("a\nb\n\n\nc "), "a\n\nb\n\nc");
    }

    proptest! {
        #[test]
        fn stable_and_lossless(blocks in prop::collection::vec("[a-z ]{0,60}", 0..20), min in 1usize..80) {
            let text = blocks.join("\n\n");
            let paras = segment_paragraphs(&text, min);
            prop_assert!(paras.iter().all(|p| !p.trim().is_empty()));
            prop_assert_eq!(segment_paragraphs(&paras.join("\n\n"), min), paras.clone());
            let squash = |s: &str| s.split_whitespace().collect::<String>();
            prop_assert_eq!(squash(&paras.join("\n")), squash(&text));
        }
    }
}
