//! Synthetic stores for the benchmarks.

use chrono::{DateTime, Duration, TimeZone, Utc};
use gatekeeper_core::{
    AccessLevel, DataClass, Gatekeeper, MenuGroup, NewUser, PolicyConfig, Principal, Resource, Role,
};

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

fn new_user(id: String, role: Role) -> NewUser {
    NewUser {
        password: format!("{id}-secret"),
        user_id: id,
        role,
        hint_question: "q".into(),
        hint_answer: "a".into(),
    }
}

fn resource(i: usize) -> Resource {
    let (class, group, level) = match i % 5 {
        0 => (DataClass::Public, MenuGroup::PublicPages, AccessLevel::Read),
        1 => (DataClass::General, MenuGroup::StaffMenu, AccessLevel::Read),
        2 => (DataClass::General, MenuGroup::StaffMenu, AccessLevel::Write),
        3 => (
            DataClass::Managerial,
            MenuGroup::ManagerReports,
            AccessLevel::Read,
        ),
        _ => (
            DataClass::Sensitive,
            MenuGroup::AdminMenu,
            AccessLevel::Admin,
        ),
    };
    Resource {
        resource_id: format!("res-{i:04}"),
        display_name: format!("Resource {i}"),
        data_class: class,
        menu_group: group,
        required_level: level,
        description: None,
    }
}

/// An in-memory store with `users` guests and staff, `resources` resources
/// and roughly `grants_per_user` read grants on each guest.
pub fn populated(users: usize, resources: usize, grants_per_user: usize) -> Gatekeeper {
    let now = epoch();
    let admin = new_user("admin".into(), Role::Administrator);
    let gk = Gatekeeper::bootstrap(None, PolicyConfig::default(), admin, now, 1).unwrap();
    let root = gk.principal_for("admin").unwrap();
    for i in 0..resources {
        gk.add_resource(&root, resource(i), now).unwrap();
    }
    for u in 0..users {
        let role = if u % 2 == 0 { Role::Guest } else { Role::Staff };
        let id = format!("user-{u:04}");
        gk.create_user(&root, new_user(id.clone(), role), now)
            .unwrap();
        if role == Role::Guest {
            for g in 0..grants_per_user.min(resources) {
                let r = (u * 7 + g * 3) % resources;
                if r % 5 == 4 {
                    continue;
                }
                let expiry = (g % 2 == 0).then(|| now + Duration::days(30));
                let rid = format!("res-{r:04}");
                let _ = gk.grant_special(&root, &id, &rid, AccessLevel::Read, expiry, now);
            }
        }
    }
    gk
}

pub fn guest(gk: &Gatekeeper) -> Principal {
    gk.principal_for("user-0000").unwrap()
}
