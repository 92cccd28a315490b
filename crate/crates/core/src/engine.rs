//! Policy decision point and menu projection.
//!
//! [`decide`] walks a fixed rule order and records each step in the
//! decision trace:
//!
//! 1. a disabled user is denied outright;
//! 2. a pending user is evaluated as an outsider, with no grants;
//! 3. an administrator is allowed everything;
//! 4. the role baseline for the resource's data class;
//! 5. an unexpired special grant covering the requested level;
//! 6. otherwise deny.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::directory::{fold_id, SpecialGrant, UserRecord, UserStatus};
use crate::error::{Error, Result};
use crate::model::{baseline_allows, AccessLevel, MenuGroup, Role};
use crate::store::StoreDocument;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalKind {
    Anonymous,
    Authenticated,
}

/// Who is asking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub kind: PrincipalKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    pub role: Role,
    pub status: UserStatus,
}

impl Principal {
    pub fn anonymous() -> Self {
        Self {
            kind: PrincipalKind::Anonymous,
            user_id: None,
            role: Role::Outsider,
            status: UserStatus::Active,
        }
    }

    pub fn for_user(user: &UserRecord) -> Self {
        Self {
            kind: PrincipalKind::Authenticated,
            user_id: Some(user.user_id.clone()),
            role: user.role,
            status: user.status,
        }
    }

    pub fn is_anonymous(&self) -> bool {
        self.kind == PrincipalKind::Anonymous
    }

    /// Name used for the audit trail.
    pub fn audit_name(&self) -> &str {
        self.user_id
            .as_deref()
            .unwrap_or(crate::audit::ACTOR_ANONYMOUS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Allow,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "grant_id", rename_all = "snake_case")]
pub enum Reason {
    AdminRole,
    Baseline,
    SpecialGrant(String),
    UserDisabled,
    UserPending,
    NoMatchingRule,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::AdminRole => f.write_str("admin_role"),
            Reason::Baseline => f.write_str("baseline"),
            Reason::SpecialGrant(id) => write!(f, "special_grant({id})"),
            Reason::UserDisabled => f.write_str("user_disabled"),
            Reason::UserPending => f.write_str("user_pending"),
            Reason::NoMatchingRule => f.write_str("no_matching_rule"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
    pub trace: Vec<String>,
}

impl Decision {
    fn allow(reason: Reason, trace: Vec<String>) -> Self {
        Self {
            verdict: Verdict::Allow,
            reason,
            trace,
        }
    }

    fn deny(reason: Reason, trace: Vec<String>) -> Self {
        Self {
            verdict: Verdict::Deny,
            reason,
            trace,
        }
    }

    pub fn is_allowed(&self) -> bool {
        self.verdict == Verdict::Allow
    }
}

/// Whether `grant` is honoured at `now`. The expiry instant itself is
/// still inside the validity window.
pub fn grant_is_live(grant: &SpecialGrant, now: DateTime<Utc>) -> bool {
    grant.expiry.is_none_or(|e| now <= e)
}

pub fn decide(
    doc: &StoreDocument,
    principal: &Principal,
    resource_id: &str,
    level: AccessLevel,
    now: DateTime<Utc>,
) -> Result<Decision> {
    let resource = doc
        .resource(resource_id)
        .ok_or_else(|| Error::UnknownResource(resource_id.to_string()))?;
    let class = resource.data_class;
    let mut trace = Vec::with_capacity(6);

    match principal.status {
        UserStatus::Disabled => {
            trace.push("status: disabled -> deny".to_string());
            return Ok(Decision::deny(Reason::UserDisabled, trace));
        }
        UserStatus::Pending => {
            trace.push("status: pending -> evaluated as outsider".to_string());
            if baseline_allows(Role::Outsider, class, level) {
                trace.push(format!("baseline(outsider, {class}, {level}): allow"));
                return Ok(Decision::allow(Reason::Baseline, trace));
            }
            trace.push(format!("baseline(outsider, {class}, {level}): no"));
            return Ok(Decision::deny(Reason::UserPending, trace));
        }
        UserStatus::Active => trace.push("status: active".to_string()),
    }

    if principal.role == Role::Administrator {
        trace.push("role administrator: allow".to_string());
        return Ok(Decision::allow(Reason::AdminRole, trace));
    }

    let role = principal.role;
    if baseline_allows(role, class, level) {
        trace.push(format!("baseline({role}, {class}, {level}): allow"));
        return Ok(Decision::allow(Reason::Baseline, trace));
    }
    trace.push(format!("baseline({role}, {class}, {level}): no"));

    if let Some(user_id) = principal
        .user_id
        .as_deref()
        .filter(|_| !principal.is_anonymous())
    {
        let key = fold_id(user_id);
        let mut candidates: Vec<&SpecialGrant> = doc
            .grants
            .iter()
            .filter(|g| g.resource_id == resource.resource_id && fold_id(&g.user_id) == key)
            .collect();
        candidates.sort_by(|a, b| a.grant_id.cmp(&b.grant_id));
        for grant in candidates {
            if !grant.level.covers(level) {
                trace.push(format!(
                    "grant {}: {} does not cover {level}",
                    grant.grant_id, grant.level
                ));
                continue;
            }
            if !grant_is_live(grant, now) {
                trace.push(format!(
                    "grant {}: expired at {}",
                    grant.grant_id,
                    grant.expiry.map(|e| e.to_rfc3339()).unwrap_or_default()
                ));
                continue;
            }
            trace.push(format!(
                "grant {}: {} covers {level}: allow",
                grant.grant_id, grant.level
            ));
            return Ok(Decision::allow(
                Reason::SpecialGrant(grant.grant_id.clone()),
                trace,
            ));
        }
    } else {
        trace.push("anonymous: no grants".to_string());
    }

    trace.push("no matching rule -> deny".to_string());
    Ok(Decision::deny(Reason::NoMatchingRule, trace))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuItem {
    pub resource_id: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuSection {
    pub group: MenuGroup,
    pub items: Vec<MenuItem>,
}

/// The menu groups a principal may see, each holding only the items it may
/// open. Empty groups are omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuTree {
    pub groups: Vec<MenuSection>,
}

impl MenuTree {
    pub fn group_names(&self) -> Vec<MenuGroup> {
        self.groups.iter().map(|s| s.group).collect()
    }

    pub fn contains(&self, resource_id: &str) -> bool {
        self.groups
            .iter()
            .any(|s| s.items.iter().any(|i| i.resource_id == resource_id))
    }
}

pub fn visible_menu(doc: &StoreDocument, principal: &Principal, now: DateTime<Utc>) -> MenuTree {
    let mut groups = Vec::new();
    for group in MenuGroup::ALL {
        let mut items: Vec<MenuItem> = doc
            .resources
            .iter()
            .filter(|r| r.menu_group == group)
            .filter(|r| {
                decide(doc, principal, &r.resource_id, r.required_level, now)
                    .is_ok_and(|d| d.is_allowed())
            })
            .map(|r| MenuItem {
                resource_id: r.resource_id.clone(),
                display_name: r.display_name.clone(),
            })
            .collect();
        if items.is_empty() {
            continue;
        }
        items.sort_by(|a, b| {
            a.display_name
                .to_lowercase()
                .cmp(&b.display_name.to_lowercase())
                .then_with(|| a.resource_id.cmp(&b.resource_id))
        });
        groups.push(MenuSection { group, items });
    }
    MenuTree { groups }
}
