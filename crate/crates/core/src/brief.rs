//! Compiles a ready plan into an [`AppBrief`] and a one-paragraph build
//! instruction for natural-language app builders.
//!
//! Everything is lexicon driven: every string in a brief is lifted verbatim
//! from the plan, apart from component names, which are the catalog's
//! canonical spellings.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::LexMatch;
use crate::plan::{Project, SectionKind};
use crate::rubric::{Detectors, RubricEvaluator};
use crate::text::{char_len, prefix_at_word, sentence_spans, sentences};

pub const MAX_INSTRUCTION_CHARS: usize = 800;
pub const MAX_FEATURE_NAME_CHARS: usize = 60;
pub const MAX_PROBLEM_CHARS: usize = 240;
pub const NAME_WORDS: usize = 5;
/// How far (in words) a feature verb may sit from the component it names.
pub const VERB_PHRASE_WORDS: usize = 8;
const MAX_LISTED_USERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub components: Vec<String>,
    pub behavior: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppBrief {
    pub app_name: String,
    pub problem_statement: String,
    pub target_users: Vec<String>,
    pub contexts: Vec<String>,
    pub features: Vec<Feature>,
    pub positive_impacts: Vec<String>,
    pub negative_impacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BriefError {
    #[error("plan is not ready to export; still failing: {}", list(.failing))]
    NotReady { failing: Vec<SectionKind> },
}

fn list(kinds: &[SectionKind]) -> String {
    kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
}

/// One feature per Design sentence that names at least one component.
pub fn extract_features(detectors: &Detectors, design_text: &str) -> Vec<Feature> {
    sentences(design_text)
        .into_iter()
        .filter_map(|sentence| {
            let components = detectors.components.distinct_terms(sentence);
            if components.is_empty() {
                return None;
            }
            Some(Feature {
                name: feature_name(detectors, sentence),
                components,
                behavior: sentence.to_string(),
            })
        })
        .collect()
}

/// The verb phrase running from the first feature verb to the next
/// component (when it is close enough), else the first few words.
fn feature_name(detectors: &Detectors, sentence: &str) -> String {
    let words = token_spans(sentence);
    let word_at = |byte: usize| words.iter().position(|w| w.end > byte).unwrap_or(words.len());
    let components = detectors.components.find_all(sentence);
    let phrase = detectors.feature_verbs.find_all(sentence).into_iter().find_map(|verb| {
        let comp: &LexMatch = components.iter().find(|c| c.span.start >= verb.span.end)?;
        let gap = word_at(comp.span.end.saturating_sub(1)) - word_at(verb.span.start);
        (gap < VERB_PHRASE_WORDS).then_some(verb.span.start..comp.span.end)
    });
    let range = phrase.unwrap_or_else(|| {
        let last = words.get(NAME_WORDS.min(words.len()).saturating_sub(1));
        0..last.map_or(sentence.len(), |w| w.end)
    });
    let name = prefix_at_word(&sentence[range], MAX_FEATURE_NAME_CHARS);
    name.trim_end_matches(|c: char| c.is_ascii_punctuation() && c != '\'' && c != ')').to_string()
}

fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

/// Distinct match texts (case-insensitive), in order, skipping any match
/// that overlaps one already taken.
fn distinct_spans(text: &str, mut matches: Vec<LexMatch>) -> Vec<String> {
    matches.sort_by_key(|m| (m.span.start, std::cmp::Reverse(m.span.end)));
    let mut taken: Vec<Range<usize>> = Vec::new();
    let mut out: Vec<String> = Vec::new();
    for m in matches {
        if taken.iter().any(|t| t.start < m.span.end && m.span.start < t.end) {
            continue;
        }
        let s = &text[m.span.clone()];
        if !out.iter().any(|o| o.eq_ignore_ascii_case(s)) {
            out.push(s.to_string());
        }
        taken.push(m.span);
    }
    out
}

pub fn build_brief(evaluator: &RubricEvaluator, project: &Project) -> Result<AppBrief, BriefError> {
    let readiness = evaluator.project_readiness(project);
    if !readiness.ready {
        return Err(BriefError::NotReady {
            failing: readiness.failing(),
        });
    }
    let d = evaluator.detectors();
    let features = extract_features(d, project.text(SectionKind::Design));
    if features.is_empty() {
        return Err(BriefError::NotReady {
            failing: vec![SectionKind::Design],
        });
    }
    let define = project.text(SectionKind::Define);
    let mut target_users = distinct_spans(define, d.user_roles.find_all(define));
    if target_users.is_empty() {
        target_users = distinct_spans(define, d.generic_users.find_all(define));
    }
    let mut context_matches = d.places.find_all(define);
    context_matches.extend(d.times.find_all(define));
    let as_owned = |k: SectionKind| sentences(project.text(k)).into_iter().map(str::to_string).collect();
    Ok(AppBrief {
        app_name: project.title().to_string(),
        problem_statement: define.trim().to_string(),
        target_users,
        contexts: distinct_spans(define, context_matches),
        features,
        positive_impacts: as_owned(SectionKind::PositiveImpact),
        negative_impacts: as_owned(SectionKind::NegativeImpact),
    })
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn feature_clause(f: &Feature) -> String {
    format!("{} ({})", f.name, join_and(&f.components))
}

/// "Make an app called X that addresses this problem: ... It should have
/// these features: ...; ... Target users: ...". Never longer than
/// [`MAX_INSTRUCTION_CHARS`]; when the feature list does not fit it is cut
/// after a whole feature and the rest are counted.
pub fn render_instruction(brief: &AppBrief) -> String {
    let problem_text = sentence_spans(&brief.problem_statement)
        .first()
        .map(|r| &brief.problem_statement[r.clone()])
        .unwrap_or("");
    let problem = prefix_at_word(problem_text, MAX_PROBLEM_CHARS)
        .trim_end_matches(['.', '!', '?', ',', ';', ':'])
        .to_string();
    let users: Vec<String> = brief.target_users.iter().take(MAX_LISTED_USERS).cloned().collect();
    let users_sentence = if users.is_empty() {
        String::new()
    } else {
        format!(" Target users: {}.", users.join(", "))
    };
    let clauses: Vec<String> = brief.features.iter().map(feature_clause).collect();
    let render = |k: usize| {
        let features = match (k, clauses.len()) {
            (_, 0) => String::new(),
            (_, 1) => format!(" It should have this feature: {}.", clauses[0]),
            (k, n) if k == n => format!(" It should have these features: {}.", clauses.join("; ")),
            (k, n) => format!(
                " It should have these features: {}; and {} more.",
                clauses[..k].join("; "),
                n - k
            ),
        };
        format!(
            "Make an app called {} that addresses this problem: {problem}.{features}{users_sentence}",
            brief.app_name
        )
    };
    for k in (1..=clauses.len().max(1)).rev() {
        let text = render(k);
        if char_len(&text) <= MAX_INSTRUCTION_CHARS {
            return text;
        }
    }
    prefix_at_word(&render(1), MAX_INSTRUCTION_CHARS).to_string()
}
