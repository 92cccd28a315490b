//! Login, sessions, password change and hint-based recovery.
//!
//! Login failures all surface as [`Error::AuthFailed`] regardless of cause;
//! the real cause goes to the audit trail only. Recovery failures for
//! unknown and inactive accounts are likewise indistinguishable.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::audit::{AuditDraft, EventKind, ACTOR_ANONYMOUS};
use crate::credential::{
    check_password_strength, generate_password, generate_token, normalize_hint_answer,
    CredentialDigest,
};
use crate::directory::{fold_id, UserStatus};
use crate::engine::Principal;
use crate::error::{Error, Result};
use crate::store::StoreDocument;
use crate::txn::Tx;

/// Consecutive wrong hint answers after which recovery locks.
pub const RECOVERY_LOCK_THRESHOLD: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub token: String,
    pub user_id: String,
    pub issued_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

fn ttl(doc: &StoreDocument) -> Duration {
    Duration::seconds(i64::try_from(doc.config.session_ttl_seconds).unwrap_or(i64::MAX / 1000))
}

fn login_failed(tx: &mut Tx, user_id: &str, cause: &str) -> Error {
    tx.record(
        AuditDraft::new(ACTOR_ANONYMOUS, EventKind::LoginFailed)
            .with("user_id", user_id)
            .with("cause", cause),
    );
    Error::AuthFailed
}

pub fn login(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    user_id: &str,
    password: &str,
) -> Result<Session> {
    let Some(user) = doc.user(user_id) else {
        // Spend the same work as a real check.
        let _ = CredentialDigest::derive(password, tx.hash_cost);
        return Err(login_failed(tx, user_id, "unknown_user"));
    };
    if !user.password_digest.verify(password) {
        return Err(login_failed(tx, user_id, "wrong_password"));
    }
    match user.status {
        UserStatus::Active => {}
        UserStatus::Disabled => return Err(login_failed(tx, user_id, "disabled")),
        UserStatus::Pending => return Err(login_failed(tx, user_id, "pending")),
    }
    let stored_id = user.user_id.clone();

    let mut token = generate_token();
    while doc.sessions.iter().any(|s| s.token == token) {
        token = generate_token();
    }
    let session = Session {
        token,
        user_id: stored_id.clone(),
        issued_at: tx.now,
        expires_at: tx.now + ttl(doc),
    };
    doc.sessions.push(session.clone());
    tx.record(AuditDraft::new(stored_id, EventKind::LoginSucceeded));
    Ok(session)
}

/// Looks up a live session and returns the principal with the user's
/// current role and status. A successful lookup slides the expiry forward.
pub fn resolve(doc: &mut StoreDocument, tx: &mut Tx, token: &str) -> Result<Principal> {
    let now = tx.now;
    let ttl = ttl(doc);
    let idx = doc
        .sessions
        .iter()
        .position(|s| s.token == token)
        .ok_or(Error::InvalidToken)?;
    let session = &doc.sessions[idx];
    if now > session.expires_at {
        return Err(Error::InvalidToken);
    }
    let user = doc
        .user(&session.user_id)
        .filter(|u| u.status == UserStatus::Active)
        .ok_or(Error::InvalidToken)?;
    let principal = Principal::for_user(user);
    doc.sessions[idx].expires_at = now + ttl;
    Ok(principal)
}

/// Read-only variant of [`resolve`] that does not extend the session.
pub fn peek(doc: &StoreDocument, token: &str, now: DateTime<Utc>) -> Result<Principal> {
    let session = doc
        .sessions
        .iter()
        .find(|s| s.token == token)
        .filter(|s| now <= s.expires_at)
        .ok_or(Error::InvalidToken)?;
    doc.user(&session.user_id)
        .filter(|u| u.status == UserStatus::Active)
        .map(Principal::for_user)
        .ok_or(Error::InvalidToken)
}

pub fn logout(doc: &mut StoreDocument, tx: &mut Tx, token: &str) {
    if let Some(pos) = doc.sessions.iter().position(|s| s.token == token) {
        let session = doc.sessions.remove(pos);
        tx.record(AuditDraft::new(session.user_id, EventKind::LoggedOut));
    }
}

pub fn change_password(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    token: &str,
    old_password: &str,
    new_password: &str,
) -> Result<()> {
    let principal = resolve(doc, tx, token)?;
    if !doc.config.allow_self_password_change {
        return Err(Error::PolicyForbidden);
    }
    let user_id = principal.user_id.unwrap_or_default();
    let user = doc.user(&user_id).ok_or(Error::InvalidToken)?;
    if !user.password_digest.verify(old_password) {
        return Err(Error::OldPasswordMismatch);
    }
    check_password_strength(new_password)?;

    let digest = CredentialDigest::derive(new_password, tx.hash_cost);
    let user = doc.user_mut(&user_id).ok_or(Error::InvalidToken)?;
    user.password_digest = digest;
    let key = fold_id(&user_id);
    doc.sessions
        .retain(|s| s.token == token || fold_id(&s.user_id) != key);
    tx.record(
        AuditDraft::new(user_id.clone(), EventKind::PasswordChanged).with("user_id", user_id),
    );
    Ok(())
}

fn recovery_failed(tx: &mut Tx, user_id: &str, stage: &str, cause: &str) {
    tx.record(
        AuditDraft::new(ACTOR_ANONYMOUS, EventKind::RecoveryFailed)
            .with("user_id", user_id)
            .with("stage", stage)
            .with("cause", cause),
    );
}

pub fn recover_begin(doc: &StoreDocument, tx: &mut Tx, user_id: &str) -> Result<String> {
    match doc.user(user_id) {
        Some(u) if u.status == UserStatus::Active => {
            tx.record(
                AuditDraft::new(ACTOR_ANONYMOUS, EventKind::RecoveryStarted)
                    .with("user_id", &u.user_id),
            );
            Ok(u.hint_question.clone())
        }
        Some(u) => {
            recovery_failed(tx, user_id, "begin", u.status.as_str());
            Err(Error::RecoveryUnavailable)
        }
        None => {
            recovery_failed(tx, user_id, "begin", "unknown_user");
            Err(Error::RecoveryUnavailable)
        }
    }
}

/// Checks the hint answer and, on a match, issues a fresh generated
/// password. The plaintext is returned exactly once and never stored.
pub fn recover_complete(
    doc: &mut StoreDocument,
    tx: &mut Tx,
    user_id: &str,
    hint_answer: &str,
) -> Result<String> {
    let Some(user) = doc.user_mut(user_id) else {
        recovery_failed(tx, user_id, "complete", "unknown_user");
        return Err(Error::RecoveryUnavailable);
    };
    if user.status != UserStatus::Active {
        let cause = user.status.as_str();
        recovery_failed(tx, user_id, "complete", cause);
        return Err(Error::RecoveryUnavailable);
    }
    if user.recovery_failures >= RECOVERY_LOCK_THRESHOLD {
        recovery_failed(tx, user_id, "complete", "locked");
        return Err(Error::RecoveryLocked);
    }
    if !user
        .hint_answer_digest
        .verify(&normalize_hint_answer(hint_answer))
    {
        user.recovery_failures += 1;
        let failures = user.recovery_failures;
        tx.keep_on_error = true;
        tx.record(
            AuditDraft::new(ACTOR_ANONYMOUS, EventKind::RecoveryFailed)
                .with("user_id", user_id)
                .with("stage", "complete")
                .with("cause", "hint_mismatch")
                .with("consecutive_failures", failures),
        );
        return Err(Error::HintMismatch);
    }

    let password = generate_password();
    user.password_digest = CredentialDigest::derive(&password, tx.hash_cost);
    user.recovery_failures = 0;
    let stored_id = user.user_id.clone();
    let key = fold_id(&stored_id);
    doc.sessions.retain(|s| fold_id(&s.user_id) != key);
    tx.record(
        AuditDraft::new(ACTOR_ANONYMOUS, EventKind::RecoveryCompleted).with("user_id", stored_id),
    );
    Ok(password)
}
