//! File-per-project persistence.
//!
//! Each project lives in `<id>.plan` as pretty-printed JSON holding the
//! project, its chat threads and an append-only event log. `index.plan` lists
//! projects most recently saved first; it is a cache and is rebuilt from the
//! project files whenever it is missing, unreadable or out of step with them.
//!
//! Saves go through a temp file that is fsynced and renamed over the target,
//! so a reader (or a restart after a crash) always sees a complete version.

use std::fs::{self, File};
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use tracing::{debug, warn};

use crate::chat::Transcript;
use crate::clock::Timestamp;
use crate::plan::{Project, SCHEMA_VERSION};

pub const FILE_EXTENSION: &str = "plan";
pub const INDEX_FILE: &str = "index.plan";
const TMP_SUFFIX: &str = ".tmp";
pub const MAX_ID_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ProjectCreated,
    SectionUpdated,
    ChatTurn,
    RubricRun,
    BriefExported,
    ConditionAssigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub ts: Timestamp,
    pub kind: EventKind,
    pub payload: Map<String, Value>,
}

impl Event {
    /// `payload` must be a JSON object; anything else is stored under
    /// `"value"`.
    pub fn new(ts: Timestamp, kind: EventKind, payload: Value) -> Self {
        let payload = match payload {
            Value::Object(map) => map,
            Value::Null => Map::new(),
            other => Map::from_iter([("value".to_string(), other)]),
        };
        Self { ts, kind, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEnvelope {
    pub schema_version: u32,
    pub project: Project,
    pub transcripts: Transcript,
    pub events: Vec<Event>,
}

impl StoredEnvelope {
    /// A new envelope whose log starts with `ProjectCreated`.
    pub fn create(project: Project) -> Self {
        let ts = project.created_at();
        let payload = serde_json::json!({ "title": project.title() });
        Self {
            schema_version: SCHEMA_VERSION,
            project,
            transcripts: Transcript::new(),
            events: vec![Event::new(ts, EventKind::ProjectCreated, payload)],
        }
    }

    /// Appends an event, clamping its timestamp so the log stays ordered.
    pub fn record(&mut self, mut event: Event) {
        if let Some(last) = self.events.last() {
            event.ts = event.ts.max(last.ts);
        }
        self.events.push(event);
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.schema_version != self.project.schema_version() {
            return Err("envelope and project schema versions differ".into());
        }
        self.project.check_invariants()?;
        self.transcripts.check_invariants(self.project.id())?;
        if self.events.windows(2).any(|w| w[1].ts < w[0].ts) {
            return Err("events are not ordered by timestamp".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: String,
    pub title: String,
    pub updated_at: Timestamp,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    projects: Vec<ProjectSummary>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("project `{0}` not found")]
    NotFound(String),
    #[error("`{0}` is not a valid project id")]
    InvalidId(String),
    #[error("stored project `{id}` is corrupt: {detail}")]
    CorruptEnvelope { id: String, detail: String },
    #[error("refusing to save an invalid envelope: {0}")]
    InvalidEnvelope(String),
    #[error("the store directory is full")]
    StorageFull,
    #[error("could not serialize project: {0}")]
    SerializationFailure(String),
    #[error("store i/o failed while trying to {op}: {source}")]
    Io {
        op: &'static str,
        #[source]
        source: std::io::Error,
    },
}

fn io(op: &'static str) -> impl FnOnce(std::io::Error) -> StoreError {
    move |source| {
        if source.kind() == ErrorKind::StorageFull {
            StoreError::StorageFull
        } else {
            StoreError::Io { op, source }
        }
    }
}

/// Ids are 1 to 64 characters of ASCII letters, digits, `-` and `_`, and
/// never the index name.
pub fn valid_project_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= MAX_ID_LEN
        && id != "index"
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Canonical on-disk bytes: pretty JSON plus a trailing newline.
pub fn encode_envelope(envelope: &StoredEnvelope) -> Result<Vec<u8>, StoreError> {
    let mut bytes =
        serde_json::to_vec_pretty(envelope).map_err(|e| StoreError::SerializationFailure(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn decode_envelope(id: &str, bytes: &[u8]) -> Result<StoredEnvelope, StoreError> {
    let corrupt = |detail: String| StoreError::CorruptEnvelope {
        id: id.to_string(),
        detail,
    };
    let raw: Value = serde_json::from_slice(bytes).map_err(|e| corrupt(e.to_string()))?;
    let version = raw
        .get("schema_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| corrupt("missing schema_version".into()))?;
    let raw = migrate(version, raw).map_err(corrupt)?;
    let envelope: StoredEnvelope = serde_json::from_value(raw).map_err(|e| corrupt(e.to_string()))?;
    envelope.check_invariants().map_err(corrupt)?;
    if envelope.project.id() != id {
        return Err(corrupt(format!("file holds project `{}`", envelope.project.id())));
    }
    Ok(envelope)
}

/// Brings an older envelope up to [`SCHEMA_VERSION`]. Version 1 is current,
/// so this is the identity for now.
fn migrate(version: u64, raw: Value) -> Result<Value, String> {
    match version {
        1 => Ok(raw),
        v if v > u64::from(SCHEMA_VERSION) => Err(format!("schema version {v} is newer than this build")),
        v => Err(format!("unknown schema version {v}")),
    }
}

/// Where a simulated crash stops a save.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// Only the first `n` bytes reached the temp file.
    PartialTempWrite(usize),
    /// The temp file is complete and synced but was never renamed.
    BeforeRename,
}

#[derive(Debug)]
pub struct ProjectStore {
    dir: PathBuf,
    tmp_counter: AtomicU64,
}

impl ProjectStore {
    /// Opens (creating if needed) a store directory and removes temp files
    /// left behind by interrupted saves.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io("create the store directory"))?;
        for entry in fs::read_dir(&dir).map_err(io("list the store directory"))? {
            let path = entry.map_err(io("list the store directory"))?.path();
            if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(TMP_SUFFIX)) {
                debug!(path = %path.display(), "removing stale temp file");
                let _ = fs::remove_file(&path);
            }
        }
        Ok(Self {
            dir,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{FILE_EXTENSION}"))
    }

    fn check_id(id: &str) -> Result<(), StoreError> {
        if valid_project_id(id) {
            Ok(())
        } else {
            Err(StoreError::InvalidId(id.to_string()))
        }
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_project_id(id) && self.path_for(id).is_file()
    }

    pub fn save(&self, envelope: &StoredEnvelope) -> Result<(), StoreError> {
        let id = envelope.project.id();
        Self::check_id(id)?;
        envelope.check_invariants().map_err(StoreError::InvalidEnvelope)?;
        let bytes = encode_envelope(envelope)?;
        self.write_atomic(&self.path_for(id), &bytes)?;
        self.update_index(ProjectSummary {
            id: id.to_string(),
            title: envelope.project.title().to_string(),
            updated_at: envelope.project.updated_at(),
        });
        Ok(())
    }

    /// Runs a save that dies at `point`, leaving the store as a crash would.
    #[doc(hidden)]
    pub fn save_interrupted(&self, envelope: &StoredEnvelope, point: CrashPoint) -> Result<(), StoreError> {
        let bytes = encode_envelope(envelope)?;
        let tmp = self.tmp_path(&self.path_for(envelope.project.id()));
        let mut f = File::create(&tmp).map_err(io("create a temp file"))?;
        match point {
            CrashPoint::PartialTempWrite(n) => {
                f.write_all(&bytes[..n.min(bytes.len())]).map_err(io("write a temp file"))?;
            }
            CrashPoint::BeforeRename => {
                f.write_all(&bytes).map_err(io("write a temp file"))?;
                f.sync_all().map_err(io("sync a temp file"))?;
            }
        }
        Ok(())
    }

    pub fn load(&self, id: &str) -> Result<StoredEnvelope, StoreError> {
        Self::check_id(id)?;
        let bytes = match fs::read(self.path_for(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(io("read a project file")(e)),
        };
        decode_envelope(id, &bytes)
    }

    /// Loads, appends one event (timestamp clamped to keep order), saves.
    pub fn append_event(&self, id: &str, event: Event) -> Result<StoredEnvelope, StoreError> {
        let mut envelope = self.load(id)?;
        envelope.record(event);
        self.save(&envelope)?;
        Ok(envelope)
    }

    /// Projects sorted by `updated_at`, newest first.
    pub fn list_projects(&self) -> Result<Vec<ProjectSummary>, StoreError> {
        let on_disk = self.project_ids()?;
        if let Some(index) = self.read_index() {
            let mut listed: Vec<&str> = index.iter().map(|s| s.id.as_str()).collect();
            listed.sort_unstable();
            if listed == on_disk.iter().map(String::as_str).collect::<Vec<_>>() {
                return Ok(index);
            }
        }
        let rebuilt = self.rebuild_index(&on_disk)?;
        Ok(rebuilt)
    }

    fn project_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(io("list the store directory"))? {
            let path = entry.map_err(io("list the store directory"))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some(FILE_EXTENSION) {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if valid_project_id(stem) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort_unstable();
        Ok(ids)
    }

    fn read_index(&self) -> Option<Vec<ProjectSummary>> {
        let bytes = fs::read(self.dir.join(INDEX_FILE)).ok()?;
        serde_json::from_slice::<IndexFile>(&bytes).ok().map(|f| f.projects)
    }

    fn rebuild_index(&self, ids: &[String]) -> Result<Vec<ProjectSummary>, StoreError> {
        let mut out = Vec::new();
        for id in ids {
            match self.load(id) {
                Ok(env) => out.push(ProjectSummary {
                    id: id.clone(),
                    title: env.project.title().to_string(),
                    updated_at: env.project.updated_at(),
                }),
                Err(e) => warn!(%id, error = %e, "skipping unreadable project while rebuilding index"),
            }
        }
        out.sort_by(|a, b| b.updated_at.cmp(&a.updated_at).then_with(|| b.id.cmp(&a.id)));
        self.write_index(&out);
        Ok(out)
    }

    // The index is a cache: failures are logged, never surfaced.
    fn update_index(&self, entry: ProjectSummary) {
        let mut list = self.read_index().unwrap_or_default();
        list.retain(|s| s.id != entry.id);
        list.insert(0, entry);
        list.sort_by_key(|s| std::cmp::Reverse(s.updated_at));
        self.write_index(&list);
    }

    fn write_index(&self, projects: &[ProjectSummary]) {
        let file = IndexFile {
            projects: projects.to_vec(),
        };
        let result = serde_json::to_vec_pretty(&file)
            .map_err(|e| StoreError::SerializationFailure(e.to_string()))
            .and_then(|mut bytes| {
                bytes.push(b'\n');
                self.write_atomic(&self.dir.join(INDEX_FILE), &bytes)
            });
        if let Err(e) = result {
            warn!(error = %e, "could not write the project index");
        }
    }

    fn tmp_path(&self, target: &Path) -> PathBuf {
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let name = target.file_name().and_then(|n| n.to_str()).unwrap_or("file");
        self.dir.join(format!(".{name}.{}.{n}{TMP_SUFFIX}", std::process::id()))
    }

    fn write_atomic(&self, target: &Path, bytes: &[u8]) -> Result<(), StoreError> {
        let tmp = self.tmp_path(target);
        let result = (|| {
            let mut f = File::create(&tmp).map_err(io("create a temp file"))?;
            f.write_all(bytes).map_err(io("write a temp file"))?;
            f.sync_all().map_err(io("sync a temp file"))?;
            drop(f);
            fs::rename(&tmp, target).map_err(io("replace a project file"))?;
            sync_dir(&self.dir);
            Ok(())
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }
}

// Directory fsync makes the rename itself durable. Not every platform lets
// a directory be opened for this, so failures are ignored.
fn sync_dir(dir: &Path) {
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
}
