//! The persisted state document and its validator.
//!
//! On disk the document is UTF-8 JSON with object keys sorted. Writes go to
//! a temporary sibling that is renamed over the target, so a reader never
//! sees a partial file.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auth::Session;
use crate::directory::{
    active_admin_count, check_id_syntax, fold_id, SpecialGrant, UserRecord, UserStatus,
};
use crate::error::{Error, Result};
use crate::model::{AccessLevel, PolicyConfig, Resource, Role};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreDocument {
    pub version: u64,
    pub config: PolicyConfig,
    pub users: Vec<UserRecord>,
    pub grants: Vec<SpecialGrant>,
    pub resources: Vec<Resource>,
    pub sessions: Vec<Session>,
}

impl Default for StoreDocument {
    fn default() -> Self {
        Self {
            version: FORMAT_VERSION,
            config: PolicyConfig::default(),
            users: Vec::new(),
            grants: Vec::new(),
            resources: Vec::new(),
            sessions: Vec::new(),
        }
    }
}

impl StoreDocument {
    pub fn user(&self, user_id: &str) -> Option<&UserRecord> {
        self.user_index(user_id).map(|i| &self.users[i])
    }

    pub fn user_mut(&mut self, user_id: &str) -> Option<&mut UserRecord> {
        self.user_index(user_id).map(|i| &mut self.users[i])
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        let key = fold_id(user_id);
        self.users.iter().position(|u| fold_id(&u.user_id) == key)
    }

    pub fn resource(&self, resource_id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.resource_id == resource_id)
    }

    /// Checks every store-wide invariant and returns all violations found.
    pub fn validate(&self) -> Result<()> {
        let problems = self.violations();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.version != FORMAT_VERSION {
            problems.push(format!("unsupported version {}", self.version));
        }
        if self.config.session_ttl_seconds == 0 {
            problems.push("session_ttl_seconds must be positive".into());
        }

        let mut seen = HashSet::new();
        for u in &self.users {
            if let Err(reason) = check_id_syntax(&u.user_id) {
                problems.push(format!("user-id {:?} is invalid: {reason}", u.user_id));
            }
            if !seen.insert(fold_id(&u.user_id)) {
                problems.push(format!("duplicate user-id {:?}", u.user_id));
            }
            if u.role == Role::Outsider {
                problems.push(format!("user {:?} has role outsider", u.user_id));
            }
            if u.status == UserStatus::Pending && u.role != Role::Guest {
                problems.push(format!("pending user {:?} must be a guest", u.user_id));
            }
            for (what, digest) in [
                ("password", &u.password_digest),
                ("hint answer", &u.hint_answer_digest),
            ] {
                if let Err(reason) = digest.check_shape() {
                    problems.push(format!("user {:?} {what} digest: {reason}", u.user_id));
                }
            }
        }
        let admins = active_admin_count(self);
        if admins == 0 {
            problems.push("no active administrator".into());
        }
        if admins > 1 && !self.config.multi_admin {
            problems.push(format!(
                "{admins} active administrators but multi_admin is off"
            ));
        }

        let mut resource_ids = HashSet::new();
        for r in &self.resources {
            if !resource_ids.insert(r.resource_id.as_str()) {
                problems.push(format!("duplicate resource-id {:?}", r.resource_id));
            }
            if let Err(reason) = r.check_placement() {
                problems.push(reason);
            }
        }

        let mut grant_ids = HashSet::new();
        let mut grant_keys = HashSet::new();
        for g in &self.grants {
            if !grant_ids.insert(g.grant_id.as_str()) {
                problems.push(format!("duplicate grant-id {:?}", g.grant_id));
            }
            if g.level == AccessLevel::Admin {
                problems.push(format!("grant {:?} has admin level", g.grant_id));
            }
            match self.user(&g.user_id) {
                None => problems.push(format!(
                    "grant {:?} names unknown user {:?}",
                    g.grant_id, g.user_id
                )),
                Some(u) if u.role == Role::Guest && g.level == AccessLevel::Write => {
                    problems.push(format!(
                        "grant {:?} gives guest {:?} write access",
                        g.grant_id, u.user_id
                    ))
                }
                Some(_) => {}
            }
            if self.resource(&g.resource_id).is_none() {
                problems.push(format!(
                    "grant {:?} names unknown resource {:?}",
                    g.grant_id, g.resource_id
                ));
            }
            if !grant_keys.insert((fold_id(&g.user_id), g.resource_id.as_str(), g.level)) {
                problems.push(format!(
                    "more than one {} grant for user {:?} on {:?}",
                    g.level, g.user_id, g.resource_id
                ));
            }
        }

        let mut tokens = HashSet::new();
        for s in &self.sessions {
            if !tokens.insert(s.token.as_str()) {
                problems.push("duplicate session token".into());
            }
            if self.user(&s.user_id).is_none() {
                problems.push(format!("session for unknown user {:?}", s.user_id));
            }
            if s.expires_at < s.issued_at {
                problems.push(format!(
                    "session for {:?} expires before it was issued",
                    s.user_id
                ));
            }
        }
        problems
    }
}

/// Canonical on-disk bytes: pretty JSON, keys sorted, trailing newline.
pub fn to_canonical_json(doc: &StoreDocument) -> Result<String> {
    let value = serde_json::to_value(doc).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let mut text =
        serde_json::to_string_pretty(&value).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    text.push('\n');
    Ok(text)
}

pub fn save(doc: &StoreDocument, path: &Path) -> Result<()> {
    save_with_hook(doc, path, |_| Ok(()))
}

/// [`save`] with a callback run after the temporary file is fully written
/// and before it is renamed into place. An error from the callback aborts
/// the save and leaves the previous file untouched.
pub fn save_with_hook<F>(doc: &StoreDocument, path: &Path, before_rename: F) -> Result<()>
where
    F: FnOnce(&Path) -> std::io::Result<()>,
{
    doc.validate()?;
    let text = to_canonical_json(doc)?;
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".gatekeeper-")
        .suffix(".tmp")
        .tempfile_in(parent)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    before_rename(tmp.path())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    if let Ok(dir) = std::fs::File::open(parent) {
        let _ = dir.sync_all();
    }
    Ok(())
}

/// Parses and validates a document from raw bytes.
pub fn parse(bytes: &[u8]) -> Result<StoreDocument> {
    let parse_err = |e: serde_json::Error| Error::ParseFailure {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(parse_err)?;
    match value.get("version").and_then(serde_json::Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(Error::UnsupportedVersion(other)),
        None => {
            return Err(Error::ParseFailure {
                line: 1,
                column: 1,
                message: "missing or non-integer \"version\"".into(),
            })
        }
    }
    let doc: StoreDocument = serde_json::from_slice(bytes).map_err(parse_err)?;
    doc.validate()?;
    Ok(doc)
}

pub fn load(path: &Path) -> Result<StoreDocument> {
    let bytes = std::fs::read(path)?;
    parse(&bytes)
}
