//! Section rubric: a deterministic heuristic grader that gates export, and an
//! optional model-graded mode that is advisory only.
//!
//! Every criterion scores 0 (absent), 1 (partial) or 2 (strong). A section is
//! ready when no criterion is below the configured minimum and the mean
//! reaches the configured threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::catalog::{Catalog, RubricConfig};
use crate::clock::Timestamp;
use crate::lexicon::{LexMatch, Lexicon};
use crate::llm::{ChatProvider, Message, ModelRequest, Role};
use crate::plan::{Project, SectionKind};
use crate::text::{is_blank, sentence_spans, word_count, word_spans};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Problem,
    Users,
    Context,
    FeatureSentences,
    Components,
    GoalLink,
    Benefit,
    Beneficiary,
    Risk,
    Affected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RubricCriterion {
    pub id: &'static str,
    pub section: SectionKind,
    pub description: &'static str,
    pub detector: Detector,
}

const GOAL_LINK_PENDING: &str = "Fill in your Define box first, then we can check that your design solves that problem.";

pub const CRITERIA: [RubricCriterion; 10] = [
    RubricCriterion {
        id: "define.problem",
        section: SectionKind::Define,
        description: "States the problem with a need or problem framing, in enough detail.",
        detector: Detector::Problem,
    },
    RubricCriterion {
        id: "define.users",
        section: SectionKind::Define,
        description: "Names specific target users.",
        detector: Detector::Users,
    },
    RubricCriterion {
        id: "define.context",
        section: SectionKind::Define,
        description: "Says where and when the problem happens.",
        detector: Detector::Context,
    },
    RubricCriterion {
        id: "design.feature",
        section: SectionKind::Design,
        description: "Describes what users can do with the app.",
        detector: Detector::FeatureSentences,
    },
    RubricCriterion {
        id: "design.components",
        section: SectionKind::Design,
        description: "Names the screen parts the features use.",
        detector: Detector::Components,
    },
    RubricCriterion {
        id: "design.goal_link",
        section: SectionKind::Design,
        description: "Connects the design back to the problem in Define.",
        detector: Detector::GoalLink,
    },
    RubricCriterion {
        id: "positive.benefit",
        section: SectionKind::PositiveImpact,
        description: "States at least one benefit of the app.",
        detector: Detector::Benefit,
    },
    RubricCriterion {
        id: "positive.beneficiary",
        section: SectionKind::PositiveImpact,
        description: "Says who benefits.",
        detector: Detector::Beneficiary,
    },
    RubricCriterion {
        id: "negative.risk",
        section: SectionKind::NegativeImpact,
        description: "States at least one risk such as privacy, distraction, or bias.",
        detector: Detector::Risk,
    },
    RubricCriterion {
        id: "negative.affected",
        section: SectionKind::NegativeImpact,
        description: "Says who could be affected by the risk.",
        detector: Detector::Affected,
    },
];

pub fn criteria_for(kind: SectionKind) -> impl Iterator<Item = &'static RubricCriterion> {
    CRITERIA.iter().filter(move |c| c.section == kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Heuristic,
    Model,
}

impl std::str::FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heuristic" => Ok(EvalMode::Heuristic),
            "model" => Ok(EvalMode::Model),
            other => Err(format!("unknown rubric mode `{other}` (expected heuristic or model)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionScore {
    pub criterion_id: String,
    pub score: u8,
    pub evidence: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RubricResult {
    pub section: SectionKind,
    pub scores: Vec<CriterionScore>,
    pub section_ready: bool,
    pub generated_at: Timestamp,
    pub mode: EvalMode,
}

impl RubricResult {
    pub fn mean(&self) -> f64 {
        mean(self.scores.iter().map(|s| s.score))
    }

    pub fn score(&self, criterion_id: &str) -> Option<u8> {
        self.scores.iter().find(|s| s.criterion_id == criterion_id).map(|s| s.score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Readiness {
    pub ready: bool,
    pub per_section: BTreeMap<SectionKind, bool>,
}

impl Readiness {
    pub fn failing(&self) -> Vec<SectionKind> {
        self.per_section.iter().filter(|(_, ok)| !**ok).map(|(k, _)| *k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RubricError {
    #[error("the title box has no rubric")]
    TitleHasNoRubric,
}

fn mean(scores: impl Iterator<Item = u8>) -> f64 {
    let (sum, n) = scores.fold((0u32, 0u32), |(s, n), x| (s + u32::from(x), n + 1));
    if n == 0 {
        0.0
    } else {
        f64::from(sum) / f64::from(n)
    }
}

/// Compiled catalog lexicons, shared with the brief exporter.
#[derive(Debug, Clone)]
pub struct Detectors {
    pub problem_cues: Lexicon,
    pub user_roles: Lexicon,
    pub generic_users: Lexicon,
    pub places: Lexicon,
    pub times: Lexicon,
    pub components: Lexicon,
    pub capability_cues: Lexicon,
    pub feature_verbs: Lexicon,
    pub benefit_cues: Lexicon,
    pub risk_cues: Lexicon,
    stopwords: BTreeSet<String>,
}

impl Detectors {
    pub fn new(config: &RubricConfig) -> Result<Self, regex::Error> {
        let l = &config.lexicons;
        Ok(Self {
            problem_cues: Lexicon::new(&l.problem_cues)?,
            user_roles: Lexicon::new(&l.user_roles)?,
            generic_users: Lexicon::new(&l.generic_users)?,
            places: Lexicon::with_prefixes(&l.place_cues, &l.place_prepositions, &l.determiners)?,
            times: Lexicon::with_prefixes(&l.time_cues, &l.time_prepositions, &l.determiners)?,
            components: Lexicon::new(&l.components)?,
            capability_cues: Lexicon::new(&l.capability_cues)?,
            feature_verbs: Lexicon::new(&l.feature_verbs)?,
            benefit_cues: Lexicon::new(&l.benefit_cues)?,
            risk_cues: Lexicon::new(&l.risk_cues)?,
            stopwords: l.stopwords.iter().map(|w| w.to_lowercase()).collect(),
        })
    }

    /// Lower-cased, singularized words of at least four letters that are
    /// not stopwords, with their spans.
    pub fn content_words(&self, text: &str) -> Vec<(String, Range<usize>)> {
        word_spans(text)
            .into_iter()
            .filter_map(|r| {
                let word = text[r.clone()].trim_end_matches('\'').to_lowercase();
                let stem = singular(&word);
                (stem.chars().count() >= 4 && !self.stopwords.contains(&word) && !self.stopwords.contains(&stem))
                    .then_some((stem, r))
            })
            .collect()
    }

    /// Place and time matches that do not overlap. Returns the pair whose
    /// covering span starts first, if any.
    pub fn context_pair(&self, text: &str) -> Option<(LexMatch, LexMatch)> {
        let places = self.places.find_all(text);
        let times = self.times.find_all(text);
        let mut best: Option<(LexMatch, LexMatch)> = None;
        for p in &places {
            for t in &times {
                if p.span.end <= t.span.start || t.span.end <= p.span.start {
                    let start = p.span.start.min(t.span.start);
                    let better = best
                        .as_ref()
                        .is_none_or(|(bp, bt)| start < bp.span.start.min(bt.span.start));
                    if better {
                        best = Some((p.clone(), t.clone()));
                    }
                }
            }
        }
        best
    }
}

fn singular(word: &str) -> String {
    if word.len() > 4 && word.ends_with('s') && !word.ends_with("ss") {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

/// The heuristic grader plus the model-graded variant.
#[derive(Debug, Clone)]
pub struct RubricEvaluator {
    config: RubricConfig,
    detectors: Detectors,
}

impl RubricEvaluator {
    pub fn new(catalog: &Catalog) -> Self {
        let config = catalog.rubric().clone();
        let detectors = Detectors::new(&config).expect("catalog lexicons are validated at load");
        Self { config, detectors }
    }

    pub fn detectors(&self) -> &Detectors {
        &self.detectors
    }

    pub fn config(&self) -> &RubricConfig {
        &self.config
    }

    /// Heuristic grading. Pure apart from the supplied timestamp.
    pub fn evaluate_section(
        &self,
        project: &Project,
        kind: SectionKind,
        now: Timestamp,
    ) -> Result<RubricResult, RubricError> {
        if !kind.has_chat() {
            return Err(RubricError::TitleHasNoRubric);
        }
        let scores = self.score_text(kind, project.text(kind), project.text(SectionKind::Define));
        Ok(self.result(kind, scores, now, EvalMode::Heuristic))
    }

    /// Scores `text` as the contents of `kind`. `define_text` is only read
    /// for the Design goal-linkage criterion.
    ///
    /// Goal linkage cannot be judged while Define is blank. In that case a
    /// non-blank Design gets a provisional 1 so that only Define reports as
    /// failing; export stays gated by Define itself.
    pub fn score_text(&self, kind: SectionKind, text: &str, define_text: &str) -> Vec<CriterionScore> {
        criteria_for(kind)
            .map(|c| {
                let pending =
                    c.detector == Detector::GoalLink && define_text.trim().is_empty() && !text.trim().is_empty();
                if pending {
                    return CriterionScore {
                        criterion_id: c.id.to_string(),
                        score: 1,
                        evidence: String::new(),
                        feedback: GOAL_LINK_PENDING.to_string(),
                    };
                }
                let (score, evidence) = self.detect(c.detector, text, define_text);
                let evidence = if score == 0 { String::new() } else { evidence };
                CriterionScore {
                    criterion_id: c.id.to_string(),
                    score,
                    evidence,
                    feedback: self.feedback_for(c.detector, score),
                }
            })
            .collect()
    }

    fn result(&self, section: SectionKind, scores: Vec<CriterionScore>, now: Timestamp, mode: EvalMode) -> RubricResult {
        let section_ready = self.is_ready(&scores);
        RubricResult {
            section,
            scores,
            section_ready,
            generated_at: now,
            mode,
        }
    }

    pub fn is_ready(&self, scores: &[CriterionScore]) -> bool {
        !scores.is_empty()
            && scores.iter().all(|s| s.score >= self.config.min_criterion_score)
            && mean(scores.iter().map(|s| s.score)) >= self.config.ready_mean_score
    }

    /// Export gate: heuristic readiness of all four sections.
    pub fn project_readiness(&self, project: &Project) -> Readiness {
        let define = project.text(SectionKind::Define);
        let per_section: BTreeMap<SectionKind, bool> = SectionKind::CHAT
            .into_iter()
            .map(|k| (k, self.is_ready(&self.score_text(k, project.text(k), define))))
            .collect();
        Readiness {
            ready: per_section.values().all(|r| *r),
            per_section,
        }
    }

    fn detect(&self, detector: Detector, text: &str, define_text: &str) -> (u8, String) {
        let d = &self.detectors;
        let slice = |r: Range<usize>| text[r].to_string();
        match detector {
            Detector::Problem => {
                let long = word_count(text) >= self.config.problem_min_words;
                let cue_sentence = sentence_spans(text).into_iter().find(|r| d.problem_cues.is_match(&text[r.clone()]));
                match (cue_sentence, long) {
                    (Some(r), true) => (2, slice(r)),
                    (Some(r), false) => (1, slice(r)),
                    (None, true) => (1, sentence_spans(text).into_iter().next().map(slice).unwrap_or_default()),
                    (None, false) => (0, String::new()),
                }
            }
            Detector::Users | Detector::Beneficiary | Detector::Affected => {
                if let Some(m) = d.user_roles.first(text) {
                    (2, slice(m.span))
                } else if let Some(m) = d.generic_users.first(text) {
                    (1, slice(m.span))
                } else {
                    (0, String::new())
                }
            }
            Detector::Context => {
                if let Some((p, t)) = d.context_pair(text) {
                    let start = p.span.start.min(t.span.start);
                    let end = p.span.end.max(t.span.end);
                    (2, slice(start..end))
                } else {
                    let first = [d.places.first(text), d.times.first(text)]
                        .into_iter()
                        .flatten()
                        .min_by_key(|m| m.span.start);
                    match first {
                        Some(m) => (1, slice(m.span)),
                        None => (0, String::new()),
                    }
                }
            }
            Detector::FeatureSentences => {
                let hits: Vec<_> = sentence_spans(text)
                    .into_iter()
                    .filter(|r| d.capability_cues.is_match(&text[r.clone()]))
                    .collect();
                let score = hits.len().min(2) as u8;
                (score, hits.into_iter().next().map(slice).unwrap_or_default())
            }
            Detector::Components => {
                let distinct = d.components.distinct_terms(text).len();
                let first = d.components.first(text).map(|m| slice(m.span)).unwrap_or_default();
                (distinct.min(2) as u8, first)
            }
            Detector::GoalLink => {
                let goal: BTreeSet<String> = d.content_words(define_text).into_iter().map(|(w, _)| w).collect();
                let mut shared: Vec<(String, Range<usize>)> = Vec::new();
                for (w, r) in d.content_words(text) {
                    if goal.contains(&w) && !shared.iter().any(|(s, _)| *s == w) {
                        shared.push((w, r));
                    }
                }
                let score = shared.len().min(2) as u8;
                (score, shared.into_iter().next().map(|(_, r)| slice(r)).unwrap_or_default())
            }
            Detector::Benefit | Detector::Risk => {
                let cues = if detector == Detector::Benefit { &d.benefit_cues } else { &d.risk_cues };
                let hits: Vec<_> = sentence_spans(text)
                    .into_iter()
                    .filter(|r| cues.is_match(&text[r.clone()]))
                    .collect();
                let full = hits
                    .iter()
                    .find(|r| word_count(&text[(*r).clone()]) >= self.config.elaborated_statement_words);
                match (full, hits.first()) {
                    (Some(r), _) => (2, slice(r.clone())),
                    (None, Some(r)) => (1, slice(r.clone())),
                    (None, None) => (0, String::new()),
                }
            }
        }
    }

    fn feedback_for(&self, detector: Detector, score: u8) -> String {
        let min_words = self.config.problem_min_words;
        let text = match (detector, score) {
            (Detector::Problem, 0) => "Add a sentence that says what problem your users have and why it matters.".to_string(),
            (Detector::Problem, 1) => format!(
                "Say more about the problem: who struggles, what goes wrong, and why it matters (aim for at least {min_words} words)."
            ),
            (Detector::Problem, _) => "You clearly described the problem.".to_string(),
            (Detector::Users, 0) => "Name your target users: who exactly will use your app?".to_string(),
            (Detector::Users, 1) => {
                "Be more specific about your target users than \"people\" or \"users\", for example students, parents, or teachers.".to_string()
            }
            (Detector::Users, _) => "You named your target users.".to_string(),
            (Detector::Context, 0) => {
                "Describe when and where your users run into this problem, for example \"at school during lunchtime\".".to_string()
            }
            (Detector::Context, 1) => "Add both where and when the problem happens, not just one of them.".to_string(),
            (Detector::Context, _) => "You described when and where the problem happens.".to_string(),
            (Detector::FeatureSentences, 0) => "Describe at least one feature: what can a user do with your app?".to_string(),
            (Detector::FeatureSentences, 1) => "Describe one more feature so your plan shows how the app works.".to_string(),
            (Detector::FeatureSentences, _) => "You described what users can do with your app.".to_string(),
            (Detector::Components, 0) => "Name the screen parts your app needs, like a button, a text box, or a list.".to_string(),
            (Detector::Components, 1) => {
                "Add another screen part, such as a button, a text box, a list, or a notification.".to_string()
            }
            (Detector::Components, _) => "You named the screen parts your app needs.".to_string(),
            (Detector::GoalLink, 0) => {
                "Connect your design to the problem in your Define box by using its key words.".to_string()
            }
            (Detector::GoalLink, 1) => "Show more clearly how your features solve the problem from your Define box.".to_string(),
            (Detector::GoalLink, _) => "Your design connects back to the problem you defined.".to_string(),
            (Detector::Benefit, 0) => "Describe at least one good thing your app will do for people.".to_string(),
            (Detector::Benefit, 1) => "Explain the benefit in a full sentence: who gets it and what changes for them.".to_string(),
            (Detector::Benefit, _) => "You explained how your app helps.".to_string(),
            (Detector::Beneficiary, 0) => "Say who benefits from your app.".to_string(),
            (Detector::Beneficiary, 1) => {
                "Name the specific group that benefits, like students, parents, or teachers.".to_string()
            }
            (Detector::Beneficiary, _) => "You named who benefits.".to_string(),
            (Detector::Risk, 0) => {
                "Describe at least one risk, such as privacy, distraction, screen time, or fairness.".to_string()
            }
            (Detector::Risk, 1) => "Explain the risk in a full sentence: what could go wrong, and when.".to_string(),
            (Detector::Risk, _) => "You thought carefully about what could go wrong.".to_string(),
            (Detector::Affected, 0) => "Say who could be harmed if something goes wrong.".to_string(),
            (Detector::Affected, 1) => {
                "Name the specific group that could be affected, like students or parents.".to_string()
            }
            (Detector::Affected, _) => "You named who could be affected.".to_string(),
        };
        text
    }

    /// Model-graded mode. Blank sections are scored locally without a call.
    /// Any reply that is not a complete, well-formed grading falls back to
    /// the heuristic scores (with `mode = heuristic`) and a logged warning.
    pub async fn evaluate_section_model(
        &self,
        provider: &dyn ChatProvider,
        model: &str,
        project: &Project,
        kind: SectionKind,
        now: Timestamp,
    ) -> Result<RubricResult, RubricError> {
        if !kind.has_chat() {
            return Err(RubricError::TitleHasNoRubric);
        }
        let text = project.text(kind);
        if is_blank(text) {
            let scores = self.score_text(kind, text, "");
            return Ok(self.result(kind, scores, now, EvalMode::Model));
        }
        let request = grading_request(model, project, kind);
        let parsed = match provider.complete(&request).await {
            Ok(reply) => self.parse_grading(kind, text, &reply.content),
            Err(e) => Err(e.to_string()),
        };
        match parsed {
            Ok(scores) => Ok(self.result(kind, scores, now, EvalMode::Model)),
            Err(why) => {
                warn!(section = %kind, reason = %why, "model grading unusable, using heuristic scores");
                self.evaluate_section(project, kind, now)
            }
        }
    }

    /// Reads `{"scores":[{"criterion_id":..,"score":0..2,"evidence":..}]}`,
    /// optionally wrapped in a code fence. Every criterion of the section
    /// must appear exactly once. Evidence that is not a substring of the
    /// section is dropped.
    pub fn parse_grading(&self, kind: SectionKind, text: &str, reply: &str) -> Result<Vec<CriterionScore>, String> {
        let body = strip_fence(reply);
        let root: Value = serde_json::from_str(body).map_err(|e| format!("not JSON: {e}"))?;
        let items = root
            .get("scores")
            .and_then(Value::as_array)
            .ok_or("missing `scores` array")?;
        let mut out = Vec::new();
        for c in criteria_for(kind) {
            let mut matching = items
                .iter()
                .filter(|i| i.get("criterion_id").and_then(Value::as_str) == Some(c.id));
            let item = matching.next().ok_or_else(|| format!("no score for `{}`", c.id))?;
            if matching.next().is_some() {
                return Err(format!("`{}` scored twice", c.id));
            }
            let score = item
                .get("score")
                .and_then(Value::as_u64)
                .filter(|s| *s <= 2)
                .ok_or_else(|| format!("bad score for `{}`", c.id))? as u8;
            let evidence = item.get("evidence").and_then(Value::as_str).unwrap_or("").trim();
            let evidence = if score > 0 && !evidence.is_empty() && text.contains(evidence) {
                evidence.to_string()
            } else {
                String::new()
            };
            out.push(CriterionScore {
                criterion_id: c.id.to_string(),
                score,
                evidence,
                feedback: self.feedback_for(c.detector, score),
            });
        }
        if items.len() != out.len() {
            return Err("unexpected criteria in reply".into());
        }
        Ok(out)
    }
}

fn strip_fence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.strip_prefix("json").unwrap_or(rest);
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn grading_request(model: &str, project: &Project, kind: SectionKind) -> ModelRequest {
    let criteria: Vec<String> = criteria_for(kind)
        .map(|c| format!("- {}: {}", c.id, c.description))
        .collect();
    let system = format!(
        "You grade one section of a student's app plan. Score each criterion 0 (absent), 1 (partial) or 2 (strong).\n\
         Criteria:\n{}\n\
         Reply with JSON only, exactly in this shape: \
         {{\"scores\":[{{\"criterion_id\":\"<id>\",\"score\":<0|1|2>,\"evidence\":\"<exact quote from the section or empty>\"}}]}}",
        criteria.join("\n")
    );
    let mut user = format!("Section: {}\nText:\n{}", kind.label(), project.text(kind));
    if kind == SectionKind::Design {
        user.push_str(&format!("\n\nDefine section, for reference:\n{}", project.text(SectionKind::Define)));
    }
    let mut request = ModelRequest::new(model, vec![Message::new(Role::System, system), Message::new(Role::User, user)]);
    request.temperature = 0.0;
    request
}

/// Student-facing feedback for one result: a single congratulation when
/// every criterion is strong, otherwise one line per criterion to improve,
/// led by an encouragement line if anything scored.
pub fn feedback_messages(result: &RubricResult) -> Vec<String> {
    let label = result.section.label();
    if !result.scores.is_empty() && result.scores.iter().all(|s| s.score >= 2) {
        return vec![format!("Great work! Your {label} section covers everything we look for.")];
    }
    let mut out = Vec::new();
    if result.scores.iter().any(|s| s.score >= 1) {
        out.push(format!("Nice progress on your {label} section! Here is what to add next."));
    }
    out.extend(result.scores.iter().filter(|s| s.score < 2).map(|s| s.feedback.clone()));
    out
}
