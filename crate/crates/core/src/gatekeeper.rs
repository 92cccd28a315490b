//! Single-writer façade over the store.
//!
//! Readers take the last published snapshot and never block. Mutations are
//! serialized: each one works on a private copy of the document, appends its
//! audit events, saves the snapshot (when file-backed) and only then
//! publishes the new copy.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};

use crate::audit::{
    audit_path_for, AuditDraft, AuditEvent, AuditFilter, AuditLog, EventKind, ACTOR_SYSTEM,
};
use crate::auth::{self, Session};
use crate::credential::{check_password_strength, DEFAULT_COST};
use crate::directory::{
    self, IdCheck, NewUser, SpecialGrant, UserFilter, UserRecord, UserStatus, UserSummary,
};
use crate::engine::{self, Decision, MenuTree, Principal};
use crate::error::{Error, Result};
use crate::model::{AccessLevel, PolicyConfig, Resource, Role};
use crate::store::{self, StoreDocument};
use crate::txn::Tx;

#[derive(Debug)]
struct Writer {
    audit: AuditLog,
    path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Gatekeeper {
    snapshot: RwLock<Arc<StoreDocument>>,
    writer: Mutex<Writer>,
    hash_cost: u32,
    fail_next_save: AtomicBool,
}

impl Gatekeeper {
    fn assemble(doc: StoreDocument, audit: AuditLog, path: Option<PathBuf>) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(doc)),
            writer: Mutex::new(Writer { audit, path }),
            hash_cost: DEFAULT_COST,
            fail_next_save: AtomicBool::new(false),
        }
    }

    /// Digest cost used for credentials created from now on. Existing
    /// digests keep the cost they were made with.
    pub fn with_hash_cost(mut self, cost: u32) -> Self {
        self.hash_cost = cost.max(1);
        self
    }

    /// A validated document held only in memory, with an in-memory trail.
    pub fn in_memory(doc: StoreDocument) -> Result<Self> {
        doc.validate()?;
        Ok(Self::assemble(doc, AuditLog::in_memory(), None))
    }

    pub fn open(path: &Path) -> Result<Self> {
        let doc = store::load(path)?;
        let audit = AuditLog::open(&audit_path_for(path))?;
        Ok(Self::assemble(doc, audit, Some(path.to_path_buf())))
    }

    /// Creates a new store holding a single administrator. With `path` set
    /// the store file must not exist yet.
    pub fn bootstrap(
        path: Option<&Path>,
        config: PolicyConfig,
        admin: NewUser,
        now: DateTime<Utc>,
        hash_cost: u32,
    ) -> Result<Self> {
        if let Some(p) = path {
            if p.exists() {
                return Err(Error::StoreExists(p.display().to_string()));
            }
        }
        if let IdCheck::Invalid(reason) =
            directory::validate_user_id(&StoreDocument::default(), &admin.user_id)
        {
            return Err(Error::InvalidId(reason));
        }
        check_password_strength(&admin.password)?;
        let admin = NewUser {
            role: Role::Administrator,
            ..admin
        };
        let tx = Tx::new(now, hash_cost.max(1));
        let record = directory::build_record(&admin, UserStatus::Active, ACTOR_SYSTEM, &tx);
        let doc = StoreDocument {
            config,
            users: vec![record],
            ..Default::default()
        };
        doc.validate()?;

        let mut audit = match path {
            Some(p) => AuditLog::open(&audit_path_for(p))?,
            None => AuditLog::in_memory(),
        };
        audit.append(
            AuditDraft::new(ACTOR_SYSTEM, EventKind::StoreBootstrapped)
                .with("user_id", &admin.user_id)
                .with("role", Role::Administrator)
                .with("status", UserStatus::Active),
            now,
        )?;
        if let Some(p) = path {
            store::save(&doc, p)?;
        }
        Ok(Self::assemble(doc, audit, path.map(Path::to_path_buf)).with_hash_cost(hash_cost))
    }

    pub fn snapshot(&self) -> Arc<StoreDocument> {
        Arc::clone(&self.snapshot.read().unwrap())
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.writer.lock().unwrap().path.clone()
    }

    /// Makes the next snapshot save fail after its audit events are
    /// written. For crash-ordering tests.
    #[doc(hidden)]
    pub fn inject_save_fault(&self) {
        self.fail_next_save.store(true, Ordering::SeqCst);
    }

    fn mutate<T>(
        &self,
        now: DateTime<Utc>,
        op: impl FnOnce(&mut StoreDocument, &mut Tx) -> Result<T>,
    ) -> Result<T> {
        let mut writer = self.writer.lock().unwrap();
        let current = self.snapshot();
        let mut doc = (*current).clone();
        let mut tx = Tx::new(now, self.hash_cost);
        let result = op(&mut doc, &mut tx);
        let commit = result.is_ok() || tx.keep_on_error;
        if commit {
            doc.sessions.retain(|s| now <= s.expires_at);
            doc.validate()?;
        }
        for draft in tx.events.drain(..) {
            writer.audit.append(draft, now)?;
        }
        if commit && doc != *current {
            if let Some(path) = &writer.path {
                let fault = self.fail_next_save.swap(false, Ordering::SeqCst);
                store::save_with_hook(&doc, path, |_| {
                    if fault {
                        Err(std::io::Error::other("injected save fault"))
                    } else {
                        Ok(())
                    }
                })?;
            }
            *self.snapshot.write().unwrap() = Arc::new(doc);
        }
        result
    }

    // ---- queries -------------------------------------------------------

    pub fn decide(
        &self,
        principal: &Principal,
        resource_id: &str,
        level: AccessLevel,
        now: DateTime<Utc>,
    ) -> Result<Decision> {
        engine::decide(&self.snapshot(), principal, resource_id, level, now)
    }

    pub fn visible_menu(&self, principal: &Principal, now: DateTime<Utc>) -> MenuTree {
        engine::visible_menu(&self.snapshot(), principal, now)
    }

    pub fn validate_user_id(&self, candidate: &str) -> IdCheck {
        directory::validate_user_id(&self.snapshot(), candidate)
    }

    pub fn list_users(&self, actor: &Principal, filter: UserFilter) -> Result<Vec<UserSummary>> {
        directory::list_users(&self.snapshot(), actor, filter)
    }

    pub fn list_grants(
        &self,
        actor: &Principal,
        user_id: Option<&str>,
    ) -> Result<Vec<SpecialGrant>> {
        directory::list_grants(&self.snapshot(), actor, user_id)
    }

    pub fn list_resources(&self) -> Vec<Resource> {
        let mut out = self.snapshot().resources.clone();
        out.sort_by(|a, b| a.resource_id.cmp(&b.resource_id));
        out
    }

    pub fn resource(&self, resource_id: &str) -> Option<Resource> {
        self.snapshot().resource(resource_id).cloned()
    }

    /// Principal for a stored user, without authentication. For operator
    /// queries such as `check --user`.
    pub fn principal_for(&self, user_id: &str) -> Result<Principal> {
        self.snapshot()
            .user(user_id)
            .map(Principal::for_user)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    pub fn audit_query(&self, actor: &Principal, filter: &AuditFilter) -> Result<Vec<AuditEvent>> {
        directory::require_admin(&self.snapshot(), actor)?;
        self.audit_events(filter)
    }

    /// Unchecked trail access for embedding code and tests.
    pub fn audit_events(&self, filter: &AuditFilter) -> Result<Vec<AuditEvent>> {
        self.writer.lock().unwrap().audit.query(filter)
    }

    // ---- directory -----------------------------------------------------

    pub fn create_user(
        &self,
        actor: &Principal,
        new: NewUser,
        now: DateTime<Utc>,
    ) -> Result<UserRecord> {
        self.mutate(now, |doc, tx| directory::create_user(doc, tx, actor, new))
    }

    pub fn self_register(
        &self,
        user_id: &str,
        password: &str,
        hint_question: &str,
        hint_answer: &str,
        now: DateTime<Utc>,
    ) -> Result<UserRecord> {
        self.mutate(now, |doc, tx| {
            let config = doc.config.clone();
            directory::self_register(
                doc,
                tx,
                user_id,
                password,
                hint_question,
                hint_answer,
                &config,
            )
        })
    }

    pub fn set_role(
        &self,
        actor: &Principal,
        user_id: &str,
        role: Role,
        now: DateTime<Utc>,
    ) -> Result<UserRecord> {
        self.mutate(now, |doc, tx| {
            directory::set_role(doc, tx, actor, user_id, role)
        })
    }

    pub fn set_status(
        &self,
        actor: &Principal,
        user_id: &str,
        status: UserStatus,
        now: DateTime<Utc>,
    ) -> Result<UserRecord> {
        self.mutate(now, |doc, tx| {
            directory::set_status(doc, tx, actor, user_id, status)
        })
    }

    pub fn unlock_recovery(
        &self,
        actor: &Principal,
        user_id: &str,
        now: DateTime<Utc>,
    ) -> Result<UserRecord> {
        self.mutate(now, |doc, tx| {
            directory::unlock_recovery(doc, tx, actor, user_id)
        })
    }

    pub fn grant_special(
        &self,
        actor: &Principal,
        user_id: &str,
        resource_id: &str,
        level: AccessLevel,
        expiry: Option<DateTime<Utc>>,
        now: DateTime<Utc>,
    ) -> Result<SpecialGrant> {
        self.mutate(now, |doc, tx| {
            directory::grant_special(doc, tx, actor, user_id, resource_id, level, expiry)
        })
    }

    pub fn revoke_grant(
        &self,
        actor: &Principal,
        grant_id: &str,
        now: DateTime<Utc>,
    ) -> Result<()> {
        self.mutate(now, |doc, tx| {
            directory::revoke_grant(doc, tx, actor, grant_id)
        })
    }

    pub fn add_resource(
        &self,
        actor: &Principal,
        resource: Resource,
        now: DateTime<Utc>,
    ) -> Result<Resource> {
        self.mutate(now, |doc, tx| {
            directory::add_resource(doc, tx, actor, resource)
        })
    }

    // ---- sessions ------------------------------------------------------

    pub fn login(&self, user_id: &str, password: &str, now: DateTime<Utc>) -> Result<Session> {
        self.mutate(now, |doc, tx| auth::login(doc, tx, user_id, password))
    }

    pub fn resolve(&self, token: &str, now: DateTime<Utc>) -> Result<Principal> {
        // Reject dead tokens without taking the writer lock.
        auth::peek(&self.snapshot(), token, now)?;
        self.mutate(now, |doc, tx| auth::resolve(doc, tx, token))
    }

    pub fn logout(&self, token: &str, now: DateTime<Utc>) -> Result<()> {
        self.mutate(now, |doc, tx| {
            auth::logout(doc, tx, token);
            Ok(())
        })
    }

    pub fn change_password(
        &self,
        token: &str,
        old_password: &str,
        new_password: &str,
        now: DateTime<Utc>,
    ) -> Result<()> {
        self.mutate(now, |doc, tx| {
            auth::change_password(doc, tx, token, old_password, new_password)
        })
    }

    pub fn recover_begin(&self, user_id: &str, now: DateTime<Utc>) -> Result<String> {
        self.mutate(now, |doc, tx| auth::recover_begin(doc, tx, user_id))
    }

    pub fn recover_complete(
        &self,
        user_id: &str,
        hint_answer: &str,
        now: DateTime<Utc>,
    ) -> Result<String> {
        self.mutate(now, |doc, tx| {
            auth::recover_complete(doc, tx, user_id, hint_answer)
        })
    }
}
