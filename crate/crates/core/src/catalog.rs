//! The editable catalog file: preset bubbles, guidance cards, and rubric
//! lexicons and thresholds.
//!
//! The file is TOML with three top-level keys, `presets`, `guidance` and
//! `rubric`. Any problem is reported with the line it was found on so a
//! teacher editing the file can fix it.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::plan::SectionKind;
use crate::scaffold::{GuidanceCard, PresetQuestion, PLACEHOLDERS};

pub const DEFAULT_CATALOG: &str = include_str!("../catalog/default.toml");

/// Minimum number of preset bubbles per chat section.
pub const MIN_PRESETS_PER_SECTION: usize = 3;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog line {line}: {message}")]
    Invalid { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RubricConfig {
    pub min_criterion_score: u8,
    pub ready_mean_score: f64,
    pub problem_min_words: usize,
    pub elaborated_statement_words: usize,
    pub lexicons: Lexicons,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexicons {
    pub problem_cues: Vec<String>,
    pub user_roles: Vec<String>,
    pub generic_users: Vec<String>,
    pub place_prepositions: Vec<String>,
    pub place_cues: Vec<String>,
    pub time_prepositions: Vec<String>,
    pub time_cues: Vec<String>,
    pub determiners: Vec<String>,
    pub components: Vec<String>,
    pub capability_cues: Vec<String>,
    pub feature_verbs: Vec<String>,
    pub benefit_cues: Vec<String>,
    pub risk_cues: Vec<String>,
    pub stopwords: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    presets: Vec<PresetQuestion>,
    guidance: Vec<GuidanceCard>,
    rubric: RubricConfig,
}

/// A validated catalog. Immutable after loading.
#[derive(Debug, Clone)]
pub struct Catalog {
    presets: Vec<PresetQuestion>,
    by_section: BTreeMap<SectionKind, Vec<usize>>,
    guidance: BTreeMap<SectionKind, GuidanceCard>,
    rubric: RubricConfig,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::from_toml_str(DEFAULT_CATALOG).expect("built-in catalog is valid")
    }
}

impl Catalog {
    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let src = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&src)
    }

    pub fn from_toml_str(src: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = toml::from_str(src).map_err(|e| CatalogError::Invalid {
            line: e.span().map(|s| line_at(src, s.start)).unwrap_or(1),
            message: e.message().trim().to_string(),
        })?;
        let mut presets = file.presets;
        for p in &mut presets {
            p.id = p.id.trim().to_string();
            p.label = p.label.trim().to_string();
            p.response_template = p.response_template.trim().to_string();
        }
        validate_presets(src, &presets)?;
        let guidance = validate_guidance(src, file.guidance)?;
        validate_rubric(src, &file.rubric)?;

        let mut by_section: BTreeMap<SectionKind, Vec<usize>> = BTreeMap::new();
        for (i, p) in presets.iter().enumerate() {
            by_section.entry(p.section).or_default().push(i);
        }
        Ok(Self {
            presets,
            by_section,
            guidance,
            rubric: file.rubric,
        })
    }

    pub fn presets(&self) -> &[PresetQuestion] {
        &self.presets
    }

    pub(crate) fn presets_for(&self, kind: SectionKind) -> impl Iterator<Item = &PresetQuestion> {
        self.by_section
            .get(&kind)
            .into_iter()
            .flatten()
            .map(|&i| &self.presets[i])
    }

    pub fn preset(&self, id: &str) -> Option<&PresetQuestion> {
        self.presets.iter().find(|p| p.id == id)
    }

    pub fn guidance_card(&self, kind: SectionKind) -> Option<&GuidanceCard> {
        self.guidance.get(&kind)
    }

    pub fn rubric(&self) -> &RubricConfig {
        &self.rubric
    }
}

fn line_at(src: &str, byte: usize) -> usize {
    let byte = byte.min(src.len());
    src.as_bytes()[..byte].iter().filter(|&&b| b == b'\n').count() + 1
}

/// Line of the first occurrence of `needle`, or of `fallback`, or 1.
fn line_of(src: &str, needle: &str, fallback: &str) -> usize {
    src.find(needle)
        .or_else(|| src.find(fallback))
        .map(|i| line_at(src, i))
        .unwrap_or(1)
}

fn invalid(line: usize, message: impl fmt::Display) -> CatalogError {
    CatalogError::Invalid {
        line,
        message: message.to_string(),
    }
}

fn validate_presets(src: &str, presets: &[PresetQuestion]) -> Result<(), CatalogError> {
    let mut seen = HashSet::new();
    for p in presets {
        let line = line_of(src, &format!("\"{}\"", p.id), "[[presets]]");
        if p.id.is_empty() {
            return Err(invalid(line, "preset id must not be empty"));
        }
        if !seen.insert(p.id.as_str()) {
            return Err(invalid(line, format!("duplicate preset id `{}`", p.id)));
        }
        if p.section == SectionKind::Title {
            return Err(invalid(line, format!("preset `{}` targets the title box", p.id)));
        }
        if p.label.is_empty() {
            return Err(invalid(line, format!("preset `{}` has an empty label", p.id)));
        }
        check_template(&p.response_template)
            .map_err(|m| invalid(line, format!("preset `{}`: {m}", p.id)))?;
    }
    for kind in SectionKind::CHAT {
        let n = presets.iter().filter(|p| p.section == kind).count();
        if n < MIN_PRESETS_PER_SECTION {
            return Err(invalid(
                line_of(src, &format!("section = \"{kind}\""), "[[presets]]"),
                format!("section `{kind}` has {n} presets, at least {MIN_PRESETS_PER_SECTION} are required"),
            ));
        }
    }
    Ok(())
}

fn check_template(template: &str) -> Result<(), String> {
    let mut rest = template;
    let mut literal = String::new();
    while let Some(open) = rest.find('{') {
        literal.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| "unclosed `{` in response_template".to_string())?;
        let name = &after[..close];
        if !PLACEHOLDERS.contains(&name) {
            return Err(format!("unknown placeholder `{{{name}}}`"));
        }
        rest = &after[close + 1..];
    }
    literal.push_str(rest);
    if literal.contains('}') {
        return Err("stray `}` in response_template".into());
    }
    if literal.trim().is_empty() {
        return Err("response_template has no text besides placeholders".into());
    }
    if !literal.contains('?') {
        return Err("response_template must end with a question back to the student".into());
    }
    let lower = literal.to_lowercase();
    if !(lower.contains("example") || lower.contains("e.g.")) {
        return Err("response_template must include a concrete example".into());
    }
    Ok(())
}

fn validate_guidance(
    src: &str,
    cards: Vec<GuidanceCard>,
) -> Result<BTreeMap<SectionKind, GuidanceCard>, CatalogError> {
    let mut out = BTreeMap::new();
    for card in cards {
        let line = line_of(src, &format!("section = \"{}\"", card.section), "[[guidance]]");
        if card.section == SectionKind::Title {
            return Err(invalid(line, "guidance card for the title box"));
        }
        if card.prompt_text.trim().is_empty() || card.example_text.trim().is_empty() {
            return Err(invalid(
                line,
                format!("guidance card for `{}` needs prompt_text and example_text", card.section),
            ));
        }
        let section = card.section;
        if out.insert(section, card).is_some() {
            return Err(invalid(
                line_of(src, "[[guidance]]", ""),
                format!("more than one guidance card for `{section}`"),
            ));
        }
    }
    for kind in SectionKind::CHAT {
        if !out.contains_key(&kind) {
            return Err(invalid(
                line_of(src, "[[guidance]]", "guidance"),
                format!("missing guidance card for `{kind}`"),
            ));
        }
    }
    Ok(out)
}

fn validate_rubric(src: &str, rubric: &RubricConfig) -> Result<(), CatalogError> {
    let line = |key: &str| line_of(src, key, "[rubric");
    if rubric.min_criterion_score > 2 {
        return Err(invalid(line("min_criterion_score"), "min_criterion_score must be 0, 1 or 2"));
    }
    if !(0.0..=2.0).contains(&rubric.ready_mean_score) {
        return Err(invalid(line("ready_mean_score"), "ready_mean_score must be within 0.0..=2.0"));
    }
    let lex = &rubric.lexicons;
    let required: [(&str, &Vec<String>); 9] = [
        ("problem_cues", &lex.problem_cues),
        ("user_roles", &lex.user_roles),
        ("place_cues", &lex.place_cues),
        ("time_cues", &lex.time_cues),
        ("components", &lex.components),
        ("capability_cues", &lex.capability_cues),
        ("feature_verbs", &lex.feature_verbs),
        ("benefit_cues", &lex.benefit_cues),
        ("risk_cues", &lex.risk_cues),
    ];
    for (name, list) in required {
        if list.iter().all(|t| t.trim().is_empty()) {
            return Err(invalid(line(name), format!("lexicon `{name}` must not be empty")));
        }
    }
    let all: [(&str, &Vec<String>); 14] = [
        ("problem_cues", &lex.problem_cues),
        ("user_roles", &lex.user_roles),
        ("generic_users", &lex.generic_users),
        ("place_prepositions", &lex.place_prepositions),
        ("place_cues", &lex.place_cues),
        ("time_prepositions", &lex.time_prepositions),
        ("time_cues", &lex.time_cues),
        ("determiners", &lex.determiners),
        ("components", &lex.components),
        ("capability_cues", &lex.capability_cues),
        ("feature_verbs", &lex.feature_verbs),
        ("benefit_cues", &lex.benefit_cues),
        ("risk_cues", &lex.risk_cues),
        ("stopwords", &lex.stopwords),
    ];
    for (name, list) in all {
        if let Err(e) = Lexicon::new(list) {
            return Err(invalid(line(name), format!("lexicon `{name}`: {e}")));
        }
    }
    Ok(())
}
