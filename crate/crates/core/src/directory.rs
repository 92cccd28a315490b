//! User lifecycle and special-grant administration.
//!
//! Every operation here mutates a working copy of the store document and
//! records exactly one audit draft on success. Callers normally reach these
//! through [`crate::Gatekeeper`], which serializes mutations and publishes
//! the result.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::audit::{AuditDraft, EventKind, ACTOR_ANONYMOUS};
use crate::credential::{check_password_strength, normalize_hint_answer, CredentialDigest};
use crate::engine::Principal;
use crate::error::{Error, Result};
use crate::model::{AccessLevel, PolicyConfig, Resource, Role, SelfRegistration};
use crate::store::StoreDocument;
use crate::txn::Tx;

pub const MIN_ID_LEN: usize = 3;
pub const MAX_ID_LEN: usize = 64;
pub const CREATED_BY_SELF: &str = "self-registration";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserStatus {
    Active,
    Disabled,
    Pending,
}

impl UserStatus {
    pub const ALL: [UserStatus; 3] = [
        UserStatus::Active,
        UserStatus::Disabled,
        UserStatus::Pending,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UserStatus::Active => "active",
            UserStatus::Disabled => "disabled",
            UserStatus::Pending => "pending",
        }
    }
}

impl fmt::Display for UserStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UserStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == wanted)
            .ok_or_else(|| Error::Parse(format!("unknown status '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub password_digest: CredentialDigest,
    pub role: Role,
    pub status: UserStatus,
    pub hint_question: String,
    pub hint_answer_digest: CredentialDigest,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
    /// Consecutive failed recovery answers.
    #[serde(default)]
    pub recovery_failures: u32,
}

/// The outward-facing view of a user. Carries no credential material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSummary {
    pub user_id: String,
    pub role: Role,
    pub status: UserStatus,
    pub created_by: String,
    pub created_at: DateTime<Utc>,
    pub recovery_locked: bool,
}

impl From<&UserRecord> for UserSummary {
    fn from(u: &UserRecord) -> Self {
        Self {
            user_id: u.user_id.clone(),
            role: u.role,
            status: u.status,
            created_by: u.created_by.clone(),
            created_at: u.created_at,
            recovery_locked: u.recovery_failures >= crate::auth::RECOVERY_LOCK_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialGrant {
    pub grant_id: String,
    pub user_id: String,
    pub resource_id: String,
    pub level: AccessLevel,
    #[serde(default)]
    pub expiry: Option<DateTime<Utc>>,
    pub granted_by: String,
    pub granted_at: DateTime<Utc>,
}

/// Outcome of checking a candidate user-id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum IdCheck {
    Available,
    Taken,
    Invalid(String),
}

/// Case-folded form used for every user-id comparison.
pub fn fold_id(id: &str) -> String {
    id.to_lowercase()
}

/// Syntactic rules only: 3 to 64 characters from letters, digits and `._-`.
pub fn check_id_syntax(candidate: &str) -> std::result::Result<(), String> {
    let len = candidate.chars().count();
    if len == 0 {
        return Err("empty".into());
    }
    if len < MIN_ID_LEN {
        return Err(format!("too short (minimum {MIN_ID_LEN} characters)"));
    }
    if len > MAX_ID_LEN {
        return Err(format!("too long (maximum {MAX_ID_LEN} characters)"));
    }
    if let Some(bad) = candidate
        .chars()
        .find(|c| !(c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-')))
    {
        return Err(format!("character {bad:?} is not allowed"));
    }
    Ok(())
}

pub fn validate_user_id(doc: &StoreDocument, candidate: &str) -> IdCheck {
    if let Err(reason) = check_id_syntax(candidate) {
        return IdCheck::Invalid(reason);
    }
    if doc.user(candidate).is_some() {
        IdCheck::Taken
    } else {
        IdCheck::Available
    }
}

fn require_available(doc: &StoreDocument, user_id: &str) -> Result<()> {
    match validate_user_id(doc, user_id) {
        IdCheck::Available => Ok(()),
        IdCheck::Taken => Err(Error::IdAlreadyExists),
        IdCheck::Invalid(reason) => Err(Error::InvalidId(reason)),
    }
}

/// Resolves the actor against the current document and checks that it is
/// an active administrator. The principal's cached role is not trusted.
pub fn require_admin<'a>(doc: &'a StoreDocument, actor: &Principal) -> Result<&'a UserRecord> {
    let id = actor.user_id.as_deref().filter(|_| !actor.is_anonymous());
    match id.and_then(|id| doc.user(id)) {
        Some(u) if u.role == Role::Administrator && u.status == UserStatus::Active => Ok(u),
        _ => Err(Error::NotAuthorized),
    }
}

pub fn active_admin_count(doc: &StoreDocument) -> usize {
    doc.users
        .iter()
        .filter(|u| u.role == Role::Administrator && u.status == UserStatus::Active)
        .count()
}

fn is_active_admin(u: &UserRecord) -> bool {
    u.role == Role::Administrator && u.status == UserStatus::Active
}

fn stored_role(role: Role) -> Result<Role> {
    if role == Role::Outsider {
        return Err(Error::InvalidRole("outsiders have no user records".into()));
    }
    Ok(role)
}

/// Parameters for a new account.
#[derive(Debug, Clone)]
pub struct NewUser {
    pub user_id: String,
    pub password: String,
    pub role: Role,
    pub hint_question: String,
    pub hint_answer: String,
}

pub(crate) fn build_record(
    new: &NewUser,
    status: UserStatus,
    created_by: &str,
    tx: &Tx,
) -> UserRecord {
    UserRecord {
        user_id: new.user_id.clone(),
        password_digest: CredentialDigest::derive(&new.password, tx.hash_cost),
        role: new.role,
        status,
        hint_question: new.hint_question.clone(),
        hint_answer_digest: CredentialDigest::derive(
            &normalize_hint_answer(&new.hint_answer),
            tx.hash_cost,
        ),
        created_by: created_by.to_string(),
        created_at: tx.now,
        recovery_failures: 0,
    }
}

pub fn create_user(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    new: NewUser,
) -> Result<UserRecord> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    let role = stored_role(new.role)?;
    require_available(doc, &new.user_id)?;
    check_password_strength(&new.password)?;
    if role == Role::Administrator && !doc.config.multi_admin && active_admin_count(doc) > 0 {
        return Err(Error::AdminCapExceeded);
    }
    let record = build_record(&new, UserStatus::Active, &admin_id, tx);
    doc.users.push(record.clone());
    tx.record(
        AuditDraft::new(admin_id, EventKind::UserCreated)
            .with("user_id", &record.user_id)
            .with("role", role)
            .with("status", record.status),
    );
    Ok(record)
}

/// Registration by an outsider. The mode comes from `config`.
pub fn self_register(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    user_id: &str,
    password: &str,
    hint_question: &str,
    hint_answer: &str,
    config: &PolicyConfig,
) -> Result<UserRecord> {
    let status = match config.self_registration {
        SelfRegistration::Disabled => return Err(Error::SelfRegistrationDisabled),
        SelfRegistration::AutoGuest => UserStatus::Active,
        SelfRegistration::PendingApproval => UserStatus::Pending,
    };
    require_available(doc, user_id)?;
    check_password_strength(password)?;
    let new = NewUser {
        user_id: user_id.to_string(),
        password: password.to_string(),
        role: Role::Guest,
        hint_question: hint_question.to_string(),
        hint_answer: hint_answer.to_string(),
    };
    let record = build_record(&new, status, CREATED_BY_SELF, tx);
    doc.users.push(record.clone());
    tx.record(
        AuditDraft::new(ACTOR_ANONYMOUS, EventKind::UserRegistered)
            .with("user_id", &record.user_id)
            .with("role", record.role)
            .with("status", record.status),
    );
    Ok(record)
}

pub fn set_role(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    user_id: &str,
    new_role: Role,
) -> Result<UserRecord> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    let new_role = stored_role(new_role)?;
    let idx = doc
        .user_index(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    let target = &doc.users[idx];
    let new_status = if target.status == UserStatus::Pending {
        UserStatus::Active
    } else {
        target.status
    };

    let was_active_admin = is_active_admin(target);
    let will_be_active_admin = new_role == Role::Administrator && new_status == UserStatus::Active;
    let others = active_admin_count(doc) - usize::from(was_active_admin);
    if will_be_active_admin && !was_active_admin && !doc.config.multi_admin && others > 0 {
        return Err(Error::AdminCapExceeded);
    }
    if was_active_admin && !will_be_active_admin && others == 0 {
        return Err(Error::SelfDemotionForbidden);
    }
    if new_role == Role::Guest {
        let key = fold_id(&target.user_id);
        if doc
            .grants
            .iter()
            .any(|g| g.level == AccessLevel::Write && fold_id(&g.user_id) == key)
        {
            return Err(Error::GuestWriteForbidden);
        }
    }

    let target = &mut doc.users[idx];
    target.role = new_role;
    target.status = new_status;
    let record = target.clone();
    tx.record(
        AuditDraft::new(admin_id, EventKind::RoleChanged)
            .with("user_id", &record.user_id)
            .with("role", record.role)
            .with("status", record.status),
    );
    Ok(record)
}

pub fn set_status(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    user_id: &str,
    new_status: UserStatus,
) -> Result<UserRecord> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    if new_status == UserStatus::Pending {
        return Err(Error::InvalidStatus(
            "pending only arises from self-registration".into(),
        ));
    }
    let idx = doc
        .user_index(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    let target = &doc.users[idx];
    let was_active_admin = is_active_admin(target);
    let will_be_active_admin =
        target.role == Role::Administrator && new_status == UserStatus::Active;
    let others = active_admin_count(doc) - usize::from(was_active_admin);
    if was_active_admin && !will_be_active_admin && others == 0 {
        return Err(Error::SelfDisableForbidden);
    }
    if will_be_active_admin && !was_active_admin && !doc.config.multi_admin && others > 0 {
        return Err(Error::AdminCapExceeded);
    }

    let target = &mut doc.users[idx];
    target.status = new_status;
    let record = target.clone();
    tx.record(
        AuditDraft::new(admin_id, EventKind::StatusChanged)
            .with("user_id", &record.user_id)
            .with("status", record.status),
    );
    Ok(record)
}

/// Clears the recovery failure counter after a lockout.
pub fn unlock_recovery(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    user_id: &str,
) -> Result<UserRecord> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    let target = doc
        .user_mut(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    target.recovery_failures = 0;
    let record = target.clone();
    tx.record(
        AuditDraft::new(admin_id, EventKind::RecoveryUnlocked).with("user_id", &record.user_id),
    );
    Ok(record)
}

pub fn grant_special(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    user_id: &str,
    resource_id: &str,
    level: AccessLevel,
    expiry: Option<DateTime<Utc>>,
) -> Result<SpecialGrant> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    let target = doc
        .user(user_id)
        .ok_or_else(|| Error::UnknownUser(user_id.to_string()))?;
    let resource = doc
        .resource(resource_id)
        .ok_or_else(|| Error::UnknownResource(resource_id.to_string()))?;
    if level == AccessLevel::Admin {
        return Err(Error::AdminLevelNotGrantable);
    }
    if target.role == Role::Guest && level == AccessLevel::Write {
        return Err(Error::GuestWriteForbidden);
    }
    let stored_user = target.user_id.clone();
    let resource_id = resource.resource_id.clone();
    let key = fold_id(&stored_user);

    let existing = doc
        .grants
        .iter_mut()
        .find(|g| g.resource_id == resource_id && g.level == level && fold_id(&g.user_id) == key);
    let grant = match existing {
        Some(g) => {
            g.expiry = expiry;
            g.granted_by = admin_id.clone();
            g.granted_at = tx.now;
            g.clone()
        }
        None => {
            let g = SpecialGrant {
                grant_id: uuid::Uuid::new_v4().to_string(),
                user_id: stored_user,
                resource_id,
                level,
                expiry,
                granted_by: admin_id.clone(),
                granted_at: tx.now,
            };
            doc.grants.push(g.clone());
            g
        }
    };
    tx.record(
        AuditDraft::new(admin_id, EventKind::GrantIssued)
            .with("grant_id", &grant.grant_id)
            .with("user_id", &grant.user_id)
            .with("resource_id", &grant.resource_id)
            .with("level", grant.level)
            .with(
                "expiry",
                grant
                    .expiry
                    .map(|e| e.to_rfc3339())
                    .unwrap_or_else(|| "none".into()),
            ),
    );
    Ok(grant)
}

pub fn revoke_grant(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    grant_id: &str,
) -> Result<()> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    let pos = doc
        .grants
        .iter()
        .position(|g| g.grant_id == grant_id)
        .ok_or_else(|| Error::UnknownGrant(grant_id.to_string()))?;
    let removed = doc.grants.remove(pos);
    tx.record(
        AuditDraft::new(admin_id, EventKind::GrantRevoked)
            .with("grant_id", &removed.grant_id)
            .with("user_id", &removed.user_id)
            .with("resource_id", &removed.resource_id),
    );
    Ok(())
}

pub fn add_resource(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    actor: &Principal,
    resource: Resource,
) -> Result<Resource> {
    let admin_id = require_admin(doc, actor)?.user_id.clone();
    resource.check_placement().map_err(Error::InvalidResource)?;
    if doc.resource(&resource.resource_id).is_some() {
        return Err(Error::ResourceExists(resource.resource_id));
    }
    doc.resources.push(resource.clone());
    tx.record(
        AuditDraft::new(admin_id, EventKind::ResourceAdded)
            .with("resource_id", &resource.resource_id)
            .with("data_class", resource.data_class)
            .with("menu_group", resource.menu_group),
    );
    Ok(resource)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UserFilter {
    pub role: Option<Role>,
    pub status: Option<UserStatus>,
}

pub fn list_users(
    doc: &StoreDocument,
    actor: &Principal,
    filter: UserFilter,
) -> Result<Vec<UserSummary>> {
    require_admin(doc, actor)?;
    let mut out: Vec<UserSummary> = doc
        .users
        .iter()
        .filter(|u| filter.role.is_none_or(|r| r == u.role))
        .filter(|u| filter.status.is_none_or(|s| s == u.status))
        .map(UserSummary::from)
        .collect();
    out.sort_by(|a, b| {
        fold_id(&a.user_id)
            .cmp(&fold_id(&b.user_id))
            .then_with(|| a.user_id.cmp(&b.user_id))
    });
    Ok(out)
}

pub fn list_grants(
    doc: &StoreDocument,
    actor: &Principal,
    user_id: Option<&str>,
) -> Result<Vec<SpecialGrant>> {
    require_admin(doc, actor)?;
    let key = user_id.map(fold_id);
    let mut out: Vec<SpecialGrant> = doc
        .grants
        .iter()
        .filter(|g| key.as_ref().is_none_or(|k| fold_id(&g.user_id) == *k))
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        fold_id(&a.user_id)
            .cmp(&fold_id(&b.user_id))
            .then_with(|| a.resource_id.cmp(&b.resource_id))
            .then_with(|| a.level.cmp(&b.level))
    });
    Ok(out)
}
