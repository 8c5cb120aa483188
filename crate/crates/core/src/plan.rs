//! The plan document: a title box plus four chat-enabled sections that walk a
//! student through Define, Design, and the positive and negative impact of
//! their app.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Timestamp;
use crate::text::{char_len, is_blank};

pub const MAX_TITLE_CHARS: usize = 200;
pub const MAX_SECTION_CHARS: usize = 10_000;
pub const SCHEMA_VERSION: u32 = 1;

/// The five boxes of the plan, in scaffold order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Title,
    Define,
    Design,
    PositiveImpact,
    NegativeImpact,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] = [
        SectionKind::Title,
        SectionKind::Define,
        SectionKind::Design,
        SectionKind::PositiveImpact,
        SectionKind::NegativeImpact,
    ];

    /// The four sections that carry a chat thread and a rubric.
    pub const CHAT: [SectionKind; 4] = [
        SectionKind::Define,
        SectionKind::Design,
        SectionKind::PositiveImpact,
        SectionKind::NegativeImpact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Title => "title",
            SectionKind::Define => "define",
            SectionKind::Design => "design",
            SectionKind::PositiveImpact => "positive_impact",
            SectionKind::NegativeImpact => "negative_impact",
        }
    }

    /// Human-facing stage name.
    pub fn label(self) -> &'static str {
        match self {
            SectionKind::Title => "Title",
            SectionKind::Define => "Define",
            SectionKind::Design => "Design",
            SectionKind::PositiveImpact => "Positive Impact",
            SectionKind::NegativeImpact => "Negative Impact",
        }
    }

    pub fn has_chat(self) -> bool {
        self != SectionKind::Title
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown section `{0}`")]
pub struct UnknownSection(pub String);

impl FromStr for SectionKind {
    type Err = UnknownSection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        SectionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == key || k.as_str().replace('_', "") == key)
            .ok_or_else(|| UnknownSection(s.to_string()))
    }
}

/// Where the student is in the scaffold: the first blank section, or
/// `Complete` once all four have text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StageCursor {
    At(SectionKind),
    Complete,
}

impl From<StageCursor> for String {
    fn from(c: StageCursor) -> String {
        match c {
            StageCursor::At(k) => k.as_str().to_string(),
            StageCursor::Complete => "complete".to_string(),
        }
    }
}

impl TryFrom<String> for StageCursor {
    type Error = UnknownSection;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "complete" {
            return Ok(StageCursor::Complete);
        }
        match s.parse()? {
            SectionKind::Title => Err(UnknownSection(s)),
            k => Ok(StageCursor::At(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionContent {
    pub text: String,
    pub last_edited_at: Timestamp,
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IssueCode {
    Empty,
    TooLong,
    TitleMissing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub section: SectionKind,
    pub code: IssueCode,
    pub message: String,
}

impl ValidationIssue {
    fn new(section: SectionKind, code: IssueCode) -> Self {
        let message = match code {
            IssueCode::Empty => format!("The {} box is empty.", section.label()),
            IssueCode::TooLong => format!(
                "The {} box is longer than {MAX_SECTION_CHARS} characters.",
                section.label()
            ),
            IssueCode::TitleMissing => "The project needs a title.".to_string(),
        };
        Self {
            section,
            code,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("title must not be blank")]
    EmptyTitle,
    #[error("title is {len} characters, the limit is {MAX_TITLE_CHARS}")]
    TitleTooLong { len: usize },
    #[error("{section} text is {len} characters, the limit is {MAX_SECTION_CHARS}")]
    SectionTooLong { section: SectionKind, len: usize },
    #[error("the title is edited with rename, not as a section")]
    TitleNotEditableHere,
}

/// A student's plan. Values are immutable; every edit returns a new project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    id: String,
    title: String,
    sections: BTreeMap<SectionKind, SectionContent>,
    stage_cursor: StageCursor,
    created_at: Timestamp,
    updated_at: Timestamp,
    schema_version: u32,
}

impl Project {
    pub fn new(id: impl Into<String>, title: &str, now: Timestamp) -> Result<Self, PlanError> {
        let title = checked_title(title)?;
        let sections = SectionKind::CHAT
            .into_iter()
            .map(|k| {
                (
                    k,
                    SectionContent {
                        text: String::new(),
                        last_edited_at: now,
                        revision: 0,
                    },
                )
            })
            .collect();
        Ok(Self {
            id: id.into(),
            title,
            sections,
            stage_cursor: StageCursor::At(SectionKind::Define),
            created_at: now,
            updated_at: now,
            schema_version: SCHEMA_VERSION,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn title(&self) -> &str {
        &self.title
    }

    pub fn stage_cursor(&self) -> StageCursor {
        self.stage_cursor
    }

    pub fn created_at(&self) -> Timestamp {
        self.created_at
    }

    pub fn updated_at(&self) -> Timestamp {
        self.updated_at
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn section(&self, kind: SectionKind) -> Option<&SectionContent> {
        self.sections.get(&kind)
    }

    /// Text of a box; the title for [`SectionKind::Title`].
    pub fn text(&self, kind: SectionKind) -> &str {
        match kind {
            SectionKind::Title => &self.title,
            k => self.sections.get(&k).map(|s| s.text.as_str()).unwrap_or(""),
        }
    }

    pub fn sections(&self) -> impl Iterator<Item = (SectionKind, &SectionContent)> {
        self.sections.iter().map(|(k, v)| (*k, v))
    }

    pub fn update_section(
        &self,
        kind: SectionKind,
        text: &str,
        now: Timestamp,
    ) -> Result<Project, PlanError> {
        if kind == SectionKind::Title {
            return Err(PlanError::TitleNotEditableHere);
        }
        let len = char_len(text);
        if len > MAX_SECTION_CHARS {
            return Err(PlanError::SectionTooLong { section: kind, len });
        }
        let mut next = self.clone();
        let now = next.touch(now);
        let entry = next.sections.entry(kind).or_insert_with(|| SectionContent {
            text: String::new(),
            last_edited_at: now,
            revision: 0,
        });
        entry.text = text.to_string();
        entry.last_edited_at = now;
        entry.revision += 1;
        next.stage_cursor = next.compute_cursor();
        Ok(next)
    }

    pub fn rename(&self, title: &str, now: Timestamp) -> Result<Project, PlanError> {
        let title = checked_title(title)?;
        let mut next = self.clone();
        next.title = title;
        next.touch(now);
        Ok(next)
    }

    // Keeps updated_at monotone even if the wall clock steps back.
    fn touch(&mut self, now: Timestamp) -> Timestamp {
        self.updated_at = now.max(self.updated_at);
        self.updated_at
    }

    fn compute_cursor(&self) -> StageCursor {
        SectionKind::CHAT
            .into_iter()
            .find(|k| is_blank(self.text(*k)))
            .map(StageCursor::At)
            .unwrap_or(StageCursor::Complete)
    }

    pub fn is_complete(&self) -> bool {
        self.stage_cursor == StageCursor::Complete
    }

    pub fn validate_structure(&self) -> Vec<ValidationIssue> {
        let mut issues = Vec::new();
        if is_blank(&self.title) {
            issues.push(ValidationIssue::new(SectionKind::Title, IssueCode::TitleMissing));
        }
        for kind in SectionKind::CHAT {
            let text = self.text(kind);
            if is_blank(text) {
                issues.push(ValidationIssue::new(kind, IssueCode::Empty));
            } else if char_len(text) > MAX_SECTION_CHARS {
                issues.push(ValidationIssue::new(kind, IssueCode::TooLong));
            }
        }
        issues
    }

    /// Checks the invariants a deserialized project must satisfy. Returns a
    /// description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        if is_blank(&self.id) {
            return Err("project id is blank".into());
        }
        if let Err(e) = checked_title(&self.title) {
            return Err(format!("title: {e}"));
        }
        for kind in SectionKind::CHAT {
            let Some(section) = self.sections.get(&kind) else {
                return Err(format!("section {kind} missing"));
            };
            if char_len(&section.text) > MAX_SECTION_CHARS {
                return Err(format!("section {kind} exceeds {MAX_SECTION_CHARS} characters"));
            }
        }
        if self.sections.contains_key(&SectionKind::Title) {
            return Err("title stored as a section".into());
        }
        if self.updated_at < self.created_at {
            return Err("updated_at precedes created_at".into());
        }
        if self.stage_cursor != self.compute_cursor() {
            return Err("stage cursor does not match section contents".into());
        }
        Ok(())
    }
}

fn checked_title(title: &str) -> Result<String, PlanError> {
    let trimmed = title.trim();
    if trimmed.is_empty() {
        return Err(PlanError::EmptyTitle);
    }
    let len = char_len(trimmed);
    if len > MAX_TITLE_CHARS {
        return Err(PlanError::TitleTooLong { len });
    }
    Ok(trimmed.to_string())
}
