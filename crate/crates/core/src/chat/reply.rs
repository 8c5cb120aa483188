//! Post-processing of model replies: trim, cap at a sentence boundary, and
//! make sure the reply opens on an encouraging note.

use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::text::{char_len, prefix_chars, sentence_spans};

pub const MAX_REPLY_CHARS: usize = 1_500;

/// Lines prefixed to replies that carry no encouragement. Each one contains
/// a word from the encouragement lexicon, so post-processing is idempotent.
pub const ENCOURAGEMENT_LINES: [&str; 5] = [
    "Great thinking!",
    "Nice question!",
    "Good idea to ask about this!",
    "I love that you're thinking this through!",
    "Interesting question!",
];

static ENCOURAGEMENT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:great|good|nice|love|well\s+done|interesting)\b").expect("lexicon")
});

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplyError {
    #[error("model reply is empty")]
    EmptyReply,
}

pub fn is_encouraging(text: &str) -> bool {
    ENCOURAGEMENT.is_match(text)
}

/// `rotation` picks the encouragement line; callers pass the count of model
/// replies already in the thread so consecutive replies vary.
pub fn postprocess_reply(raw: &str, rotation: usize) -> Result<String, ReplyError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ReplyError::EmptyReply);
    }
    let capped = cap_at_sentence(trimmed, MAX_REPLY_CHARS);
    if is_encouraging(&capped) {
        return Ok(capped);
    }
    let line = ENCOURAGEMENT_LINES[rotation % ENCOURAGEMENT_LINES.len()];
    let room = MAX_REPLY_CHARS - char_len(line) - 2;
    Ok(format!("{line}\n\n{}", cap_at_sentence(trimmed, room)))
}

/// At most `max_chars` characters, ending at the last complete sentence (or
/// line) that fits. Text without a usable boundary is cut at a word and given
/// an ellipsis.
pub fn cap_at_sentence(text: &str, max_chars: usize) -> String {
    if char_len(text) <= max_chars {
        return text.to_string();
    }
    let window = prefix_chars(text, max_chars);
    let end = sentence_spans(text)
        .into_iter()
        .map(|r| r.end)
        .take_while(|&end| end <= window.len())
        .last();
    match end {
        Some(end) => window[..end].trim_end().to_string(),
        None => {
            let room = prefix_chars(text, max_chars.saturating_sub(1));
            let cut = room
                .rfind(char::is_whitespace)
                .filter(|&i| !room[..i].trim().is_empty())
                .map(|i| room[..i].trim_end())
                .unwrap_or(room);
            format!("{cut}…")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encouraging_reply_is_unchanged() {
        assert_eq!(
            postprocess_reply("Great idea! Try a quiz.", 0).unwrap(),
            "Great idea! Try a quiz."
        );
    }

    #[test]
    fn plain_reply_gets_a_rotated_prefix() {
        assert_eq!(
            postprocess_reply("Add a list view.", 0).unwrap(),
            "Great thinking!\n\nAdd a list view."
        );
        assert_eq!(
            postprocess_reply("  Add a list view.  ", 1).unwrap(),
            "Nice question!\n\nAdd a list view."
        );
        assert_eq!(
            postprocess_reply("Add a list view.", 5).unwrap(),
            "Great thinking!\n\nAdd a list view."
        );
    }

    #[test]
    fn blank_is_an_error() {
        assert_eq!(postprocess_reply("", 0), Err(ReplyError::EmptyReply));
        assert_eq!(postprocess_reply(" \n\t", 3), Err(ReplyError::EmptyReply));
    }

    #[test]
    fn long_replies_end_on_a_sentence() {
        let sentence = "This is a good sentence about apps. ";
        let raw = sentence.repeat(100);
        let out = postprocess_reply(&raw, 0).unwrap();
        assert!(char_len(&out) <= MAX_REPLY_CHARS);
        assert!(out.ends_with("apps."));
    }

    #[test]
    fn long_text_without_sentences_is_elided() {
        let raw = "word ".repeat(600);
        let out = cap_at_sentence(raw.trim(), 100);
        assert!(char_len(&out) <= 100);
        assert!(out.ends_with("word…"));
    }

    #[test]
    fn lexicon_matches_whole_words_only() {
        assert!(is_encouraging("Well  done on this"));
        assert!(!is_encouraging("goodbye and nicety"));
    }

    proptest! {
        #[test]
        fn output_is_bounded_encouraging_and_idempotent(raw in "[ -~\n]{1,2500}", rot in 0usize..20) {
            match postprocess_reply(&raw, rot) {
                Err(ReplyError::EmptyReply) => prop_assert!(raw.trim().is_empty()),
                Ok(out) => {
                    prop_assert!(char_len(&out) <= MAX_REPLY_CHARS);
                    prop_assert!(is_encouraging(&out));
                    prop_assert_eq!(postprocess_reply(&out, rot).unwrap(), out.clone());
                    prop_assert_eq!(postprocess_reply(&raw, rot).unwrap(), out);
                }
            }
        }
    }
}
