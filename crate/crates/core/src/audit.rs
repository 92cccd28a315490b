//! Append-only audit trail, one JSON object per line.
//!
//! Sequence numbers start at 1 and grow by exactly one per event. Events are
//! written before the state snapshot they describe is published, so after a
//! crash the trail may run ahead of the snapshot but never behind it;
//! [`replay_check`] detects that gap.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::directory::{fold_id, UserStatus};
use crate::error::{Error, Result};
use crate::model::Role;
use crate::store::StoreDocument;

pub const ACTOR_ANONYMOUS: &str = "anonymous";
pub const ACTOR_SYSTEM: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    StoreBootstrapped,
    UserCreated,
    UserRegistered,
    RoleChanged,
    StatusChanged,
    RecoveryUnlocked,
    GrantIssued,
    GrantRevoked,
    ResourceAdded,
    LoginSucceeded,
    LoginFailed,
    LoggedOut,
    PasswordChanged,
    RecoveryStarted,
    RecoveryCompleted,
    RecoveryFailed,
}

impl std::str::FromStr for EventKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Parse(format!("unknown audit event kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: String,
    pub kind: EventKind,
    pub detail: BTreeMap<String, String>,
}

/// An event that has not been assigned a sequence number yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditDraft {
    pub actor: String,
    pub kind: EventKind,
    pub detail: BTreeMap<String, String>,
}

impl AuditDraft {
    pub fn new(actor: impl Into<String>, kind: EventKind) -> Self {
        Self {
            actor: actor.into(),
            kind,
            detail: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.detail.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditFilter {
    pub actor: Option<String>,
    pub kind: Option<EventKind>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
}

impl AuditFilter {
    pub fn matches(&self, event: &AuditEvent) -> bool {
        self.actor.as_deref().is_none_or(|a| a == event.actor)
            && self.kind.is_none_or(|k| k == event.kind)
            && self.since.is_none_or(|t| event.at >= t)
            && self.until.is_none_or(|t| event.at <= t)
    }
}

/// Audit file path for a store file: the store's file name plus
/// `.audit.jsonl`.
pub fn audit_path_for(store_path: &Path) -> PathBuf {
    let mut name = store_path.file_name().unwrap_or_default().to_os_string();
    name.push(".audit.jsonl");
    store_path.with_file_name(name)
}

#[derive(Debug)]
enum Backend {
    Memory(Vec<AuditEvent>),
    File(PathBuf),
}

#[derive(Debug)]
pub struct AuditLog {
    backend: Backend,
    next_seq: u64,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory(Vec::new()),
            next_seq: 1,
        }
    }

    /// Opens (or creates) a trail on disk. Existing lines are scanned to
    /// recover the next sequence number; a gap or malformed line is refused.
    pub fn open(path: &Path) -> Result<Self> {
        let events = read_events(path)?;
        let next_seq = events.last().map_or(1, |e| e.seq + 1);
        Ok(Self {
            backend: Backend::File(path.to_path_buf()),
            next_seq,
        })
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn append(&mut self, draft: AuditDraft, at: DateTime<Utc>) -> Result<AuditEvent> {
        let event = AuditEvent {
            seq: self.next_seq,
            at,
            actor: draft.actor,
            kind: draft.kind,
            detail: draft.detail,
        };
        match &mut self.backend {
            Backend::Memory(events) => events.push(event.clone()),
            Backend::File(path) => {
                let mut line = serde_json::to_string(&event)
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
                line.push('\n');
                let mut file = OpenOptions::new().create(true).append(true).open(&*path)?;
                file.write_all(line.as_bytes())?;
                file.sync_data()?;
            }
        }
        self.next_seq += 1;
        Ok(event)
    }

    pub fn query(&self, filter: &AuditFilter) -> Result<Vec<AuditEvent>> {
        let all = match &self.backend {
            Backend::Memory(events) => events.clone(),
            Backend::File(path) => read_events(path)?,
        };
        Ok(all.into_iter().filter(|e| filter.matches(e)).collect())
    }
}

/// Reads a trail file, checking that sequence numbers are gap-free.
pub fn read_events(path: &Path) -> Result<Vec<AuditEvent>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut events: Vec<AuditEvent> = Vec::new();
    for (index, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: AuditEvent = serde_json::from_str(&line).map_err(|e| Error::ParseFailure {
            line: index + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        let expected = events.last().map_or(1, |e| e.seq + 1);
        if event.seq != expected {
            return Err(Error::Validation(vec![format!(
                "audit sequence gap at line {}: expected {expected}, found {}",
                index + 1,
                event.seq
            )]));
        }
        events.push(event);
    }
    Ok(events)
}

/// Replays user and grant lifecycle events and compares the result with a
/// snapshot. Returns one message per disagreement; an empty list means the
/// snapshot reflects every event in the trail.
pub fn replay_check(events: &[AuditEvent], doc: &StoreDocument) -> Vec<String> {
    #[derive(Debug, PartialEq)]
    struct UserState {
        role: Option<Role>,
        status: Option<UserStatus>,
    }
    let mut users: HashMap<String, UserState> = HashMap::new();
    let mut grants: HashMap<String, bool> = HashMap::new();
    let mut resources: HashMap<String, bool> = HashMap::new();

    let parse_role = |e: &AuditEvent| e.detail.get("role").and_then(|r| r.parse::<Role>().ok());
    let parse_status = |e: &AuditEvent| {
        e.detail
            .get("status")
            .and_then(|s| s.parse::<UserStatus>().ok())
    };

    for event in events {
        let user = event.detail.get("user_id").map(|u| fold_id(u));
        match event.kind {
            EventKind::StoreBootstrapped
            | EventKind::UserCreated
            | EventKind::UserRegistered
            | EventKind::RoleChanged
            | EventKind::StatusChanged => {
                if let Some(user) = user {
                    let state = users.entry(user).or_insert(UserState {
                        role: None,
                        status: None,
                    });
                    if let Some(role) = parse_role(event) {
                        state.role = Some(role);
                    }
                    if let Some(status) = parse_status(event) {
                        state.status = Some(status);
                    }
                }
            }
            EventKind::GrantIssued => {
                if let Some(id) = event.detail.get("grant_id") {
                    grants.insert(id.clone(), true);
                }
            }
            EventKind::GrantRevoked => {
                if let Some(id) = event.detail.get("grant_id") {
                    grants.insert(id.clone(), false);
                }
            }
            EventKind::ResourceAdded => {
                if let Some(id) = event.detail.get("resource_id") {
                    resources.insert(id.clone(), true);
                }
            }
            _ => {}
        }
    }

    let mut problems = Vec::new();
    for (id, state) in &users {
        match doc.users.iter().find(|u| fold_id(&u.user_id) == *id) {
            None => problems.push(format!(
                "user '{id}' is in the audit trail but not the snapshot"
            )),
            Some(record) => {
                if state.role.is_some_and(|r| r != record.role) {
                    problems.push(format!("user '{id}' role differs from the audit trail"));
                }
                if state.status.is_some_and(|s| s != record.status) {
                    problems.push(format!("user '{id}' status differs from the audit trail"));
                }
            }
        }
    }
    for (id, live) in &grants {
        let present = doc.grants.iter().any(|g| g.grant_id == *id);
        if present != *live {
            problems.push(format!(
                "grant '{id}' is {} in the audit trail but {} in the snapshot",
                if *live { "live" } else { "revoked" },
                if present { "present" } else { "absent" }
            ));
        }
    }
    for id in resources.keys() {
        if !doc.resources.iter().any(|r| r.resource_id == *id) {
            problems.push(format!(
                "resource '{id}' is in the audit trail but not the snapshot"
            ));
        }
    }
    problems.sort();
    problems
}
