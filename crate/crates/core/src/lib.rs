//! Core library for App Planner, a guided design-thinking planner for
//! student mobile-app projects.
//!
//! The plan document has five boxes (title plus four chat-enabled sections).
//! Each section has a chat thread where preset question bubbles get canned,
//! rule-based replies and free-text questions go to a chat-completion model.
//! A heuristic rubric scores every section, gates export, and the exported
//! [`brief::AppBrief`] renders into a one-paragraph "Make an app ..." build
//! instruction for natural-language app builders.

pub mod brief;
pub mod catalog;
pub mod chat;
pub mod clock;
pub mod fixtures;
pub mod lexicon;
pub mod llm;
pub mod plan;
pub mod rubric;
pub mod scaffold;
pub mod store;
pub mod study;
pub mod text;

pub use catalog::Catalog;
pub use clock::{Clock, IdSource, Timestamp};
pub use plan::{Project, SectionKind, StageCursor};
