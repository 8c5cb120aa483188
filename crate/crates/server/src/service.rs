//! The application service: every operation the HTTP API and the CLI expose,
//! with persistence, event logging and per-project write serialization.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use app_planner_core::brief::{build_brief, render_instruction, AppBrief, BriefError};
use app_planner_core::catalog::Catalog;
use app_planner_core::chat::{ChatError, ChatInput, ChatMessage, ChatOrchestrator, ChatSettings, ChatTurn};
use app_planner_core::clock::{Clock, IdSource, Timestamp};
use app_planner_core::fixtures::Fixture;
use app_planner_core::llm::{ChatProvider, ModelReply, ModelRequest, ProviderError};
use app_planner_core::plan::{PlanError, Project, SectionKind};
use app_planner_core::rubric::{EvalMode, Readiness, RubricError, RubricEvaluator, RubricResult};
use app_planner_core::scaffold::{Guidance, PresetQuestion, ScaffoldError};
use app_planner_core::store::{Event, EventKind, ProjectStore, ProjectSummary, StoreError, StoredEnvelope};
use app_planner_core::study::{assign_conditions, compute_metrics, Assignment, InteractionMetrics, StudyError};
use async_trait::async_trait;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;
use tokio::sync::Semaphore;

pub const DEFAULT_PROVIDER_CAP: usize = 4;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Scaffold(#[from] ScaffoldError),
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Brief(#[from] BriefError),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{0}")]
    Validation(String),
}

/// Bounds the number of provider calls in flight across all projects.
pub struct CappedProvider {
    inner: Arc<dyn ChatProvider>,
    permits: Semaphore,
}

impl CappedProvider {
    pub fn new(inner: Arc<dyn ChatProvider>, cap: usize) -> Self {
        Self {
            inner,
            permits: Semaphore::new(cap.max(1)),
        }
    }
}

#[async_trait]
impl ChatProvider for CappedProvider {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelReply, ProviderError> {
        let _permit = self
            .permits
            .acquire()
            .await
            .map_err(|_| ProviderError::Config("provider pool closed".into()))?;
        self.inner.complete(request).await
    }
}

#[derive(Debug, Clone)]
pub struct PlannerOptions {
    pub chat: ChatSettings,
    pub provider_cap: usize,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        Self {
            chat: ChatSettings::default(),
            provider_cap: DEFAULT_PROVIDER_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectView {
    pub project: Project,
    pub readiness: Readiness,
    pub guidance: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct BriefView {
    pub brief: AppBrief,
    pub instruction: String,
}

pub struct Planner {
    store: ProjectStore,
    catalog: Arc<Catalog>,
    orchestrator: ChatOrchestrator,
    evaluator: RubricEvaluator,
    provider: Arc<CappedProvider>,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdSource>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl Planner {
    pub fn new(
        store: ProjectStore,
        catalog: Arc<Catalog>,
        provider: Arc<dyn ChatProvider>,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdSource>,
        options: PlannerOptions,
    ) -> Self {
        let provider = Arc::new(CappedProvider::new(provider, options.provider_cap));
        let orchestrator = ChatOrchestrator::new(catalog.clone(), provider.clone(), clock.clone(), options.chat);
        let evaluator = RubricEvaluator::new(&catalog);
        Self {
            store,
            catalog,
            orchestrator,
            evaluator,
            provider,
            clock,
            ids,
            locks: Mutex::new(HashMap::new()),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn store(&self) -> &ProjectStore {
        &self.store
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(id.to_string()).or_default().clone()
    }

    fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub async fn create_project(&self, title: &str) -> Result<Project, ServiceError> {
        let id = self.fresh_id()?;
        let project = Project::new(id, title, self.now())?;
        let envelope = StoredEnvelope::create(project);
        self.store.save(&envelope)?;
        Ok(envelope.project)
    }

    fn fresh_id(&self) -> Result<String, ServiceError> {
        for _ in 0..8 {
            let id = self.ids.next_id();
            if !self.store.exists(&id) {
                return Ok(id);
            }
        }
        Err(ServiceError::Validation("could not allocate a fresh project id".into()))
    }

    pub fn list_projects(&self) -> Result<Vec<ProjectSummary>, ServiceError> {
        Ok(self.store.list_projects()?)
    }

    pub fn get_project(&self, id: &str) -> Result<ProjectView, ServiceError> {
        let envelope = self.store.load(id)?;
        Ok(self.view(envelope.project))
    }

    pub fn view(&self, project: Project) -> ProjectView {
        let readiness = self.evaluator.project_readiness(&project);
        let guidance: Guidance<'_> = self.catalog.next_guidance(&project);
        let guidance = serde_json::to_value(&guidance).expect("guidance serializes");
        ProjectView {
            project,
            readiness,
            guidance,
        }
    }

    pub async fn rename(&self, id: &str, title: &str) -> Result<Project, ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut envelope = self.store.load(id)?;
        envelope.project = envelope.project.rename(title, self.now())?;
        self.store.save(&envelope)?;
        Ok(envelope.project)
    }

    pub async fn update_section(&self, id: &str, kind: SectionKind, text: &str) -> Result<Project, ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut envelope = self.store.load(id)?;
        let now = self.now();
        envelope.project = envelope.project.update_section(kind, text, now)?;
        let revision = envelope.project.section(kind).map_or(0, |s| s.revision);
        envelope.record(Event::new(
            now,
            EventKind::SectionUpdated,
            json!({ "section": kind, "revision": revision, "chars": text.chars().count() }),
        ));
        self.store.save(&envelope)?;
        Ok(envelope.project)
    }

    pub fn presets(&self, kind: SectionKind) -> Result<Vec<PresetQuestion>, ServiceError> {
        Ok(self.catalog.preset_catalog(kind)?.into_iter().cloned().collect())
    }

    /// One chat turn. Blocked and unavailable turns are persisted (both
    /// messages and a `ChatTurn` event) before the error is returned.
    pub async fn chat(&self, id: &str, kind: SectionKind, input: ChatInput) -> Result<ChatTurn, ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut envelope = self.store.load(id)?;
        let input_kind = match input {
            ChatInput::PresetClick { .. } => "preset",
            ChatInput::FreeText { .. } => "freeform",
        };
        let result = self
            .orchestrator
            .handle_message(&envelope.project, &mut envelope.transcripts, kind, input)
            .await;
        let (outcome, turn) = match &result {
            Ok(turn) => ("ok", Some(turn)),
            Err(e @ ChatError::ModerationBlocked { .. }) => ("moderation_blocked", e.appended()),
            Err(e @ ChatError::ProviderUnavailable { .. }) => ("provider_unavailable", e.appended()),
            Err(_) => ("rejected", None),
        };
        if let Some(turn) = turn {
            envelope.record(Event::new(
                turn.planner_reply.created_at,
                EventKind::ChatTurn,
                json!({
                    "section": kind,
                    "input": input_kind,
                    "outcome": outcome,
                    "origin": turn.planner_reply.origin,
                    "student_message_id": turn.student_echo.id,
                    "reply_message_id": turn.planner_reply.id,
                }),
            ));
            self.store.save(&envelope)?;
        }
        Ok(result?)
    }

    pub fn transcript(&self, id: &str, section: Option<SectionKind>) -> Result<Vec<ChatMessage>, ServiceError> {
        let envelope = self.store.load(id)?;
        let t = &envelope.transcripts;
        Ok(match section {
            Some(k) if !k.has_chat() => return Err(ChatError::TitleHasNoChat.into()),
            Some(k) => t.thread(k).to_vec(),
            None => SectionKind::CHAT.into_iter().flat_map(|k| t.thread(k).to_vec()).collect(),
        })
    }

    pub async fn evaluate(
        &self,
        id: &str,
        section: Option<SectionKind>,
        mode: EvalMode,
    ) -> Result<Vec<RubricResult>, ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let mut envelope = self.store.load(id)?;
        let kinds = match section {
            Some(k) => vec![k],
            None => SectionKind::CHAT.to_vec(),
        };
        let mut results = Vec::with_capacity(kinds.len());
        for kind in kinds {
            let now = self.now();
            let result = match mode {
                EvalMode::Heuristic => self.evaluator.evaluate_section(&envelope.project, kind, now)?,
                EvalMode::Model => {
                    let model = self.orchestrator.settings().model.clone();
                    self.evaluator
                        .evaluate_section_model(self.provider.as_ref(), &model, &envelope.project, kind, now)
                        .await?
                }
            };
            results.push(result);
        }
        let summary: Vec<_> = results
            .iter()
            .map(|r| {
                json!({
                    "section": r.section,
                    "mode": r.mode,
                    "ready": r.section_ready,
                    "scores": r.scores.iter().map(|s| (s.criterion_id.clone(), s.score)).collect::<BTreeMap<_, _>>(),
                })
            })
            .collect();
        envelope.record(Event::new(
            self.now(),
            EventKind::RubricRun,
            json!({ "requested_mode": mode, "results": summary }),
        ));
        self.store.save(&envelope)?;
        Ok(results)
    }

    /// Read-only: builds the brief without logging anything.
    pub fn brief(&self, id: &str) -> Result<BriefView, ServiceError> {
        let envelope = self.store.load(id)?;
        let brief = build_brief(&self.evaluator, &envelope.project)?;
        let instruction = render_instruction(&brief);
        Ok(BriefView { brief, instruction })
    }

    /// Builds the brief and logs a `BriefExported` event.
    pub async fn export(&self, id: &str) -> Result<BriefView, ServiceError> {
        let lock = self.lock_for(id);
        let _guard = lock.lock().await;
        let view = self.brief(id)?;
        let mut envelope = self.store.load(id)?;
        envelope.record(Event::new(
            self.now(),
            EventKind::BriefExported,
            json!({ "features": view.brief.features.len(), "instruction_chars": view.instruction.chars().count() }),
        ));
        self.store.save(&envelope)?;
        Ok(view)
    }

    /// Assigns conditions. When `projects` maps participants to project ids,
    /// each of those projects gets a `ConditionAssigned` event; all of them
    /// must exist before anything is written.
    pub async fn assign(
        &self,
        participant_ids: &[String],
        task_ids: &[String],
        projects: &BTreeMap<String, String>,
    ) -> Result<Vec<Assignment>, ServiceError> {
        let assignments = assign_conditions(participant_ids, task_ids)?;
        if let Some(unknown) = projects.keys().find(|p| !participant_ids.contains(p)) {
            return Err(ServiceError::Validation(format!(
                "`projects` names participant `{unknown}`, who is not in participant_ids"
            )));
        }
        for project_id in projects.values() {
            self.store.load(project_id)?;
        }
        for a in &assignments {
            let Some(project_id) = projects.get(&a.participant_id) else {
                continue;
            };
            let lock = self.lock_for(project_id);
            let _guard = lock.lock().await;
            let mut envelope = self.store.load(project_id)?;
            envelope.record(Event::new(
                self.now(),
                EventKind::ConditionAssigned,
                json!({ "participant_id": a.participant_id, "tasks": a.tasks }),
            ));
            self.store.save(&envelope)?;
        }
        Ok(assignments)
    }

    pub fn metrics(&self, id: &str) -> Result<InteractionMetrics, ServiceError> {
        Ok(compute_metrics(&self.store.load(id)?))
    }

    /// Creates a fully filled example project, logging one section update
    /// per box.
    pub async fn seed_demo(&self, fixture: Fixture) -> Result<Project, ServiceError> {
        let project = self.create_project(fixture.text().title).await?;
        let mut last = project;
        for (kind, text) in fixture.sections() {
            last = self.update_section(last.id(), kind, text).await?;
        }
        Ok(last)
    }

    pub fn envelope(&self, id: &str) -> Result<StoredEnvelope, ServiceError> {
        Ok(self.store.load(id)?)
    }
}
