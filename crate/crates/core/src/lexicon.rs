//! Case-insensitive phrase matching against a closed word list.

use std::ops::Range;

use regex::{Regex, RegexBuilder};

/// One hit of a [`Lexicon`] in a text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexMatch {
    /// Byte span of the whole match, including any leading preposition.
    pub span: Range<usize>,
    /// The lexicon entry that matched, in its catalog spelling.
    pub term: String,
}

/// A compiled word list. Multi-word entries tolerate any run of whitespace,
/// entries match at word boundaries, and a trailing plural `s`/`es` is
/// accepted. Longer entries win over their prefixes ("list view" over "list").
#[derive(Debug, Clone)]
pub struct Lexicon {
    terms: Vec<String>,
    regex: Regex,
}

impl Lexicon {
    pub fn new(terms: &[String]) -> Result<Self, regex::Error> {
        Self::build(terms, &[], &[])
    }

    /// Like [`Lexicon::new`], but each match may also swallow a leading
    /// preposition and optional determiner ("at school", "during the day").
    pub fn with_prefixes(
        terms: &[String],
        prepositions: &[String],
        determiners: &[String],
    ) -> Result<Self, regex::Error> {
        Self::build(terms, prepositions, determiners)
    }

    fn build(
        terms: &[String],
        prepositions: &[String],
        determiners: &[String],
    ) -> Result<Self, regex::Error> {
        let mut terms: Vec<String> = terms
            .iter()
            .map(|t| normalize(t))
            .filter(|t| !t.is_empty())
            .collect();
        terms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        terms.dedup();

        let body = alternation(&terms);
        let prefix = if prepositions.is_empty() {
            String::new()
        } else {
            let det = if determiners.is_empty() {
                String::new()
            } else {
                format!(r"(?:(?:{})\s+)?", alternation(determiners))
            };
            format!(r"(?:(?:{})\s+{det})?", alternation(prepositions))
        };
        // An empty list compiles to a pattern that never matches.
        let pattern = if terms.is_empty() {
            r"[^\s\S]".to_string()
        } else {
            format!(r"\b{prefix}({body})(?:s|es)?\b")
        };
        let regex = RegexBuilder::new(&pattern).case_insensitive(true).build()?;
        Ok(Self { terms, regex })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn find_all(&self, text: &str) -> Vec<LexMatch> {
        self.regex
            .captures_iter(text)
            .filter_map(|caps| {
                let whole = caps.get(0)?;
                let term = normalize(caps.get(1)?.as_str());
                Some(LexMatch {
                    span: whole.range(),
                    term,
                })
            })
            .collect()
    }

    pub fn first(&self, text: &str) -> Option<LexMatch> {
        self.find_all(text).into_iter().next()
    }

    pub fn is_match(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    /// Distinct matched entries in order of first appearance.
    pub fn distinct_terms(&self, text: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in self.find_all(text) {
            if !out.contains(&m.term) {
                out.push(m.term);
            }
        }
        out
    }
}

fn normalize(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn alternation(words: &[String]) -> String {
    let mut words: Vec<String> = words.iter().map(|w| normalize(w)).collect();
    words.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    words
        .iter()
        .map(|w| {
            w.split(' ')
                .map(regex::escape)
                .collect::<Vec<_>>()
                .join(r"\s+")
        })
        .collect::<Vec<_>>()
        .join("|")
}
