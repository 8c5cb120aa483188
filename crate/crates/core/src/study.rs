//! Within-subjects study support: counterbalanced aided/unaided task
//! assignment and interaction metrics recomputed from a project's event log.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::plan::SectionKind;
use crate::store::{EventKind, StoredEnvelope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Aided,
    Unaided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSlot {
    pub task_id: String,
    pub condition: Condition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub participant_id: String,
    pub tasks: Vec<TaskSlot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StudyError {
    #[error("at least one participant is required")]
    NoParticipants,
    #[error("exactly two tasks are required, got {0}")]
    TaskCountNot2(usize),
    #[error("participant `{0}` is listed twice")]
    DuplicateParticipant(String),
    #[error("task `{0}` is listed twice")]
    DuplicateTask(String),
}

/// Size of the first group (unaided first): ceil(n/2), so five
/// participants split 3/2.
pub fn first_group_size(n: usize) -> usize {
    n.div_ceil(2)
}

/// Task order is fixed; only the condition flips. The first
/// [`first_group_size`] participants do T1 unaided and T2 aided, the rest
/// the reverse.
pub fn assign_conditions(participant_ids: &[String], task_ids: &[String]) -> Result<Vec<Assignment>, StudyError> {
    if participant_ids.is_empty() {
        return Err(StudyError::NoParticipants);
    }
    let [t1, t2] = task_ids else {
        return Err(StudyError::TaskCountNot2(task_ids.len()));
    };
    if t1 == t2 {
        return Err(StudyError::DuplicateTask(t1.clone()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = participant_ids.iter().find(|p| !seen.insert(p.as_str())) {
        return Err(StudyError::DuplicateParticipant(dup.clone()));
    }
    let split = first_group_size(participant_ids.len());
    Ok(participant_ids
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (c1, c2) = if i < split {
                (Condition::Unaided, Condition::Aided)
            } else {
                (Condition::Aided, Condition::Unaided)
            };
            Assignment {
                participant_id: p.clone(),
                tasks: vec![
                    TaskSlot {
                        task_id: t1.clone(),
                        condition: c1,
                    },
                    TaskSlot {
                        task_id: t2.clone(),
                        condition: c2,
                    },
                ],
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionMetrics {
    pub project_id: String,
    pub chat_turns: u64,
    pub preset_clicks: u64,
    pub freeform_queries: u64,
    pub per_section_edit_counts: BTreeMap<SectionKind, u64>,
    pub per_section_chat_counts: BTreeMap<SectionKind, u64>,
    pub duration_from_events: u64,
}

/// Counts come only from the event log. A `ChatTurn` payload carries
/// `section` and `input` (`"preset"` or `"freeform"`); a `SectionUpdated`
/// payload carries `section`. Duration is the last event's timestamp minus
/// the `ProjectCreated` timestamp, in milliseconds.
pub fn compute_metrics(envelope: &StoredEnvelope) -> InteractionMetrics {
    let zeroed = || SectionKind::CHAT.into_iter().map(|k| (k, 0u64)).collect::<BTreeMap<_, _>>();
    let mut m = InteractionMetrics {
        project_id: envelope.project.id().to_string(),
        chat_turns: 0,
        preset_clicks: 0,
        freeform_queries: 0,
        per_section_edit_counts: zeroed(),
        per_section_chat_counts: zeroed(),
        duration_from_events: 0,
    };
    let section_of = |payload: &serde_json::Map<String, Value>| {
        payload
            .get("section")
            .and_then(Value::as_str)
            .and_then(|s| s.parse::<SectionKind>().ok())
    };
    for e in &envelope.events {
        match e.kind {
            EventKind::ChatTurn => {
                match e.payload.get("input").and_then(Value::as_str) {
                    Some("preset") => m.preset_clicks += 1,
                    _ => m.freeform_queries += 1,
                }
                if let Some(count) = section_of(&e.payload).and_then(|k| m.per_section_chat_counts.get_mut(&k)) {
                    *count += 1;
                }
            }
            EventKind::SectionUpdated => {
                if let Some(count) = section_of(&e.payload).and_then(|k| m.per_section_edit_counts.get_mut(&k)) {
                    *count += 1;
                }
            }
            _ => {}
        }
    }
    m.chat_turns = m.preset_clicks + m.freeform_queries;
    let created = envelope
        .events
        .iter()
        .find(|e| e.kind == EventKind::ProjectCreated)
        .map(|e| e.ts)
        .unwrap_or(envelope.project.created_at());
    if let Some(last) = envelope.events.last() {
        m.duration_from_events = last.ts.since(created);
    }
    m
}
