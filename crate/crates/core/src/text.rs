//! Small text utilities shared by the rubric, the brief exporter and reply
//! post-processing. All spans are byte ranges into the original string.

use std::ops::Range;

/// Splits `text` into trimmed sentence spans.
///
/// A sentence ends at `.`, `!` or `?` followed by whitespace (or the end of
/// the text), or at a line break. Empty spans are dropped.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let end = match c {
            '\n' | '\r' => Some(i),
            '.' | '!' | '?' => match chars.peek() {
                None => Some(i + c.len_utf8()),
                Some((_, next)) if next.is_whitespace() => Some(i + c.len_utf8()),
                _ => None,
            },
            _ => None,
        };
        if let Some(end) = end {
            push_trimmed(text, start..end, &mut spans);
            start = end;
            if c == '\n' || c == '\r' {
                start = i + c.len_utf8();
            }
        }
    }
    push_trimmed(text, start..text.len(), &mut spans);
    spans
}

fn push_trimmed(text: &str, range: Range<usize>, out: &mut Vec<Range<usize>>) {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let s = range.start + lead;
        out.push(s..s + trimmed.len());
    }
}

pub fn sentences(text: &str) -> Vec<&str> {
    sentence_spans(text).into_iter().map(|r| &text[r]).collect()
}

/// Number of whitespace-separated tokens that contain a letter or digit.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

pub fn is_blank(text: &str) -> bool {
    text.trim().is_empty()
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// The longest prefix of `text` holding at most `max_chars` characters.
pub fn prefix_chars(text: &str, max_chars: usize) -> &str {
    match text.char_indices().nth(max_chars) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

/// Prefix of at most `max_chars` characters, cut back to the last whitespace
/// when the cut would split a word. Falls back to a hard cut for a single
/// overlong word.
pub fn prefix_at_word(text: &str, max_chars: usize) -> &str {
    if char_len(text) <= max_chars {
        return text;
    }
    let hard = prefix_chars(text, max_chars);
    match hard.rfind(char::is_whitespace) {
        Some(i) if !hard[..i].trim().is_empty() => hard[..i].trim_end(),
        _ => hard,
    }
}

/// Byte spans of the words (letters and apostrophes) in `text`.
pub fn word_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let in_word = c.is_alphabetic() || (c == '\'' && start.is_some());
        match (in_word, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_terminators_followed_by_space() {
        let t = "Add a list. Show a map! Why? 3.5 stars";
        assert_eq!(sentences(t), vec!["Add a list.", "Show a map!", "Why?", "3.5 stars"]);
    }

    #[test]
    fn hyphenated_and_inner_dots_stay_together() {
        let t = "press the button to see the English-translated version";
        assert_eq!(sentences(t), vec![t]);
        assert_eq!(sentences("see example.com now"), vec!["see example.com now"]);
    }

    #[test]
    fn line_breaks_end_sentences() {
        assert_eq!(sentences("one\n\n two \r\nthree"), vec!["one", "two", "three"]);
        assert!(sentences("   \n ").is_empty());
    }

    #[test]
    fn spans_index_original_text() {
        let t = "  First one.   Second ";
        for r in sentence_spans(t) {
            assert_eq!(&t[r.clone()], t[r].trim());
        }
    }

    #[test]
    fn word_count_ignores_punctuation_tokens() {
        assert_eq!(word_count("a - b , c"), 3);
        assert_eq!(word_count(""), 0);
    }

    #[test]
    fn prefixes_respect_char_boundaries() {
        assert_eq!(prefix_chars("héllo", 2), "hé");
        assert_eq!(prefix_at_word("hello big world", 12), "hello big");
        assert_eq!(prefix_at_word("abcdefgh", 3), "abc");
        assert_eq!(prefix_at_word("short", 10), "short");
    }

    #[test]
    fn word_spans_keep_apostrophes() {
        let t = "today's menu, don't";
        let words: Vec<_> = word_spans(t).into_iter().map(|r| &t[r]).collect();
        assert_eq!(words, vec!["today's", "menu", "don't"]);
    }
}
