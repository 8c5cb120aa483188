//! Stage guidance and the rule-based quick-reply layer.
//!
//! Nothing here talks to a model: preset replies are catalog templates with
//! the project's title and Define text filled in.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::plan::{Project, SectionKind, StageCursor};
use crate::text::{is_blank, prefix_at_word};

/// Placeholders a response template may use.
pub const PLACEHOLDERS: [&str; 2] = ["title", "define_text"];

const EMPTY_DEFINE: &str = "(your Define box is still empty)";
const MAX_INTERPOLATED_CHARS: usize = 300;

/// A quick-reply bubble and its canned answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetQuestion {
    pub id: String,
    pub section: SectionKind,
    pub label: String,
    pub response_template: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceCard {
    pub section: SectionKind,
    pub prompt_text: String,
    pub example_text: String,
}

/// The card to show next. `review` is set once every box has text, in which
/// case the card is the last stage's, shown for a final look.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Guidance<'a> {
    #[serde(flatten)]
    pub card: &'a GuidanceCard,
    pub review: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaffoldError {
    #[error("the title box has no preset questions")]
    NoPresetsForTitle,
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

impl Catalog {
    pub fn preset_catalog(&self, kind: SectionKind) -> Result<Vec<&PresetQuestion>, ScaffoldError> {
        if kind == SectionKind::Title {
            return Err(ScaffoldError::NoPresetsForTitle);
        }
        Ok(self.presets_for(kind).collect())
    }

    pub fn rule_response(&self, question_id: &str, project: &Project) -> Result<String, ScaffoldError> {
        let preset = self
            .preset(question_id)
            .ok_or_else(|| ScaffoldError::UnknownPreset(question_id.to_string()))?;
        Ok(render_template(&preset.response_template, project))
    }

    pub fn next_guidance(&self, project: &Project) -> Guidance<'_> {
        let (kind, review) = match project.stage_cursor() {
            StageCursor::At(k) => (k, false),
            StageCursor::Complete => (SectionKind::NegativeImpact, true),
        };
        let card = self
            .guidance_card(kind)
            .expect("validated catalog has a card for every chat section");
        Guidance { card, review }
    }
}

pub fn render_template(template: &str, project: &Project) -> String {
    let define = project.text(SectionKind::Define).trim();
    let define = if is_blank(define) {
        EMPTY_DEFINE.to_string()
    } else {
        let cut = prefix_at_word(define, MAX_INTERPOLATED_CHARS);
        if cut.len() < define.len() {
            format!("\"{cut}…\"")
        } else {
            format!("\"{cut}\"")
        }
    };
    // Single pass, so student text that looks like a placeholder stays literal.
    let mut out = String::with_capacity(template.len() + define.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').map(|close| (&after[..close], close)) {
            Some(("title", close)) => {
                out.push_str(project.title());
                rest = &after[close + 1..];
            }
            Some(("define_text", close)) => {
                out.push_str(&define);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
