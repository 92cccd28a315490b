//! Builders and random generators for stores and decision universes.

use std::collections::HashSet;
use std::sync::OnceLock;

use chrono::{DateTime, Duration, TimeZone, Utc};
use gatekeeper_core::credential::CredentialDigest;
use gatekeeper_core::{
    AccessLevel, DataClass, MenuGroup, PolicyConfig, Resource, Role, SpecialGrant, StoreDocument,
    UserRecord, UserStatus,
};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 3, 9, 0, 0).unwrap()
}

fn digest() -> CredentialDigest {
    static D: OnceLock<CredentialDigest> = OnceLock::new();
    D.get_or_init(|| CredentialDigest::derive("placeholder-secret", 1))
        .clone()
}

pub fn user(id: &str, role: Role, status: UserStatus) -> UserRecord {
    UserRecord {
        user_id: id.to_string(),
        password_digest: digest(),
        role,
        status,
        hint_question: "q".into(),
        hint_answer_digest: digest(),
        created_by: "root".into(),
        created_at: t0(),
        recovery_failures: 0,
    }
}

pub fn resource(id: &str, (class, group, level): (DataClass, MenuGroup, AccessLevel)) -> Resource {
    Resource {
        resource_id: id.to_string(),
        display_name: format!("Page {id}"),
        data_class: class,
        menu_group: group,
        required_level: level,
        description: None,
    }
}

pub fn grant(
    id: &str,
    user_id: &str,
    resource_id: &str,
    level: AccessLevel,
    expiry: Option<DateTime<Utc>>,
) -> SpecialGrant {
    SpecialGrant {
        grant_id: id.to_string(),
        user_id: user_id.to_string(),
        resource_id: resource_id.to_string(),
        level,
        expiry,
        granted_by: "root".into(),
        granted_at: t0() - Duration::days(1),
    }
}

/// Every (class, group, required level) a resource may legally carry.
pub fn resource_kinds() -> Vec<(DataClass, MenuGroup, AccessLevel)> {
    let placements = [
        (MenuGroup::PublicPages, AccessLevel::Read),
        (MenuGroup::StaffMenu, AccessLevel::Read),
        (MenuGroup::StaffMenu, AccessLevel::Write),
        (MenuGroup::ManagerReports, AccessLevel::Read),
        (MenuGroup::ManagerReports, AccessLevel::Write),
        (MenuGroup::AdminMenu, AccessLevel::Admin),
    ];
    DataClass::ALL
        .iter()
        .flat_map(|&c| placements.iter().map(move |&(g, l)| (c, g, l)))
        .collect()
}

/// Every role/status combination a stored user can have.
pub fn user_profiles() -> Vec<(Role, UserStatus)> {
    let roles = [Role::Guest, Role::Staff, Role::Manager, Role::Administrator];
    let statuses = [
        UserStatus::Active,
        UserStatus::Disabled,
        UserStatus::Pending,
    ];
    roles
        .iter()
        .flat_map(|&r| statuses.iter().map(move |&s| (r, s)))
        .collect()
}

pub fn random_case(rng: &mut StdRng, id: &str) -> String {
    id.chars()
        .map(|c| {
            if rng.random_bool(0.3) {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

fn random_expiry(rng: &mut StdRng, now: DateTime<Utc>) -> Option<DateTime<Utc>> {
    let offsets = [None, Some(-7200), Some(-1), Some(0), Some(1), Some(86_400)];
    offsets
        .choose(rng)
        .unwrap()
        .map(|s| now + Duration::seconds(s))
}

/// A store that passes validation, with at most the given number of users
/// (including the administrator it always holds), resources and grants.
pub fn random_store(
    rng: &mut StdRng,
    max_users: usize,
    max_resources: usize,
    max_grants: usize,
) -> StoreDocument {
    let now = t0();
    let multi_admin = rng.random_bool(0.5);
    let mut users = vec![user(
        &random_case(rng, "root"),
        Role::Administrator,
        UserStatus::Active,
    )];
    let n_users = rng.random_range(1..=max_users);
    for i in 1..n_users {
        let roles = [Role::Guest, Role::Staff, Role::Manager, Role::Administrator];
        let role = *roles.choose(rng).unwrap();
        let mut status = *[
            UserStatus::Active,
            UserStatus::Active,
            UserStatus::Disabled,
            UserStatus::Pending,
        ]
        .choose(rng)
        .unwrap();
        if status == UserStatus::Pending && role != Role::Guest {
            status = UserStatus::Active;
        }
        if role == Role::Administrator && !multi_admin {
            status = UserStatus::Disabled;
        }
        users.push(user(&random_case(rng, &format!("user{i}")), role, status));
    }

    let kinds = resource_kinds();
    let n_res = rng.random_range(0..=max_resources);
    let resources: Vec<Resource> = (0..n_res)
        .map(|i| {
            let mut r = resource(&format!("res-{i}"), *kinds.choose(rng).unwrap());
            r.display_name = ["alpha", "Beta", "gamma", "Alpha", "delta"]
                .choose(rng)
                .unwrap()
                .to_string();
            r
        })
        .collect();

    let mut grants = Vec::new();
    let mut seen = HashSet::new();
    if !resources.is_empty() {
        let n_grants = rng.random_range(0..=max_grants);
        for i in 0..n_grants {
            let u = users.choose(rng).unwrap();
            let r = resources.choose(rng).unwrap();
            let level = if rng.random_bool(0.5) {
                AccessLevel::Read
            } else {
                AccessLevel::Write
            };
            if u.role == Role::Guest && level == AccessLevel::Write {
                continue;
            }
            let key = (u.user_id.to_lowercase(), r.resource_id.clone(), level);
            if !seen.insert(key) {
                continue;
            }
            let uid = random_case(rng, &u.user_id);
            grants.push(grant(
                &format!("g{i:02}"),
                &uid,
                &r.resource_id,
                level,
                random_expiry(rng, now),
            ));
        }
    }
    grants.shuffle(rng);

    let doc = StoreDocument {
        config: PolicyConfig {
            multi_admin,
            ..PolicyConfig::default()
        },
        users,
        grants,
        resources,
        ..StoreDocument::default()
    };
    if let Err(e) = doc.validate() {
        panic!("generator produced an invalid store: {e}");
    }
    doc
}

/// A random instant near the interesting boundaries of `doc`.
pub fn random_now(rng: &mut StdRng, doc: &StoreDocument) -> DateTime<Utc> {
    let mut candidates = vec![t0(), t0() + Duration::days(30)];
    for g in &doc.grants {
        if let Some(e) = g.expiry {
            candidates.extend([e, e - Duration::seconds(1), e + Duration::seconds(1)]);
        }
    }
    *candidates.choose(rng).unwrap()
}
