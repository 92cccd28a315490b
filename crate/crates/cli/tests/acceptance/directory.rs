use std::collections::HashSet;
use std::process::Command;

use gatekeeper_core::{
    AccessLevel, AuditFilter, DataClass, Error, Gatekeeper, IdCheck, MenuGroup, NewUser,
    PolicyConfig, Principal, Resource, Role, UserStatus,
};
use rand::distr::{Distribution, Uniform};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::gen::{random_case, t0};

fn new_user(id: &str, role: Role) -> NewUser {
    NewUser {
        user_id: id.to_string(),
        password: format!("{id}-password"),
        role,
        hint_question: "q".into(),
        hint_answer: "a".into(),
    }
}

fn fresh(multi_admin: bool) -> Gatekeeper {
    let config = PolicyConfig {
        multi_admin,
        ..PolicyConfig::default()
    };
    let gk = Gatekeeper::bootstrap(None, config, new_user("root", Role::Administrator), t0(), 1)
        .unwrap();
    let root = gk.principal_for("root").unwrap();
    for (id, class, group, level) in [
        (
            "staff-page",
            DataClass::General,
            MenuGroup::StaffMenu,
            AccessLevel::Read,
        ),
        (
            "entry-form",
            DataClass::General,
            MenuGroup::StaffMenu,
            AccessLevel::Write,
        ),
        (
            "report",
            DataClass::Managerial,
            MenuGroup::ManagerReports,
            AccessLevel::Read,
        ),
    ] {
        let r = Resource {
            resource_id: id.into(),
            display_name: id.into(),
            data_class: class,
            menu_group: group,
            required_level: level,
            description: None,
        };
        gk.add_resource(&root, r, t0()).unwrap();
    }
    gk
}

/// Checks the store invariants from first principles on the published snapshot.
fn check_invariants(gk: &Gatekeeper, expected_events: usize) {
    let doc = gk.snapshot();
    let mut folded = HashSet::new();
    for u in &doc.users {
        assert!(
            folded.insert(u.user_id.to_lowercase()),
            "duplicate folded id {}",
            u.user_id
        );
    }
    let active_admins = doc
        .users
        .iter()
        .filter(|u| u.role == Role::Administrator && u.status == UserStatus::Active)
        .count();
    assert!(active_admins >= 1, "no active administrator left");
    if !doc.config.multi_admin {
        assert!(
            active_admins <= 1,
            "{active_admins} active administrators without multi-admin"
        );
    }
    for g in &doc.grants {
        assert_ne!(
            g.level,
            AccessLevel::Admin,
            "admin-level grant {}",
            g.grant_id
        );
        let owner = doc
            .users
            .iter()
            .find(|u| u.user_id.to_lowercase() == g.user_id.to_lowercase())
            .expect("grant owner exists");
        assert!(
            !(owner.role == Role::Guest && g.level == AccessLevel::Write),
            "guest {} holds write grant {}",
            owner.user_id,
            g.grant_id
        );
    }
    let events = gk.audit_events(&AuditFilter::default()).unwrap();
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1, "audit sequence gap");
    }
    assert_eq!(
        events.len(),
        expected_events,
        "one audit event per successful mutation"
    );
}

enum Op {
    Create(String, Role),
    SetRole(String, Role),
    SetStatus(String, UserStatus),
    Grant(String, String, AccessLevel),
    Revoke(String),
}

fn random_op(rng: &mut StdRng, gk: &Gatekeeper) -> Op {
    let pool = [
        "alice", "bob", "carol", "dave", "erin", "root", "x", "bad id!",
    ];
    let roles = Role::ALL;
    let doc = gk.snapshot();
    let existing = |rng: &mut StdRng| {
        let u = doc.users.choose(rng).unwrap();
        random_case(rng, &u.user_id)
    };
    let some_user = |rng: &mut StdRng| {
        if rng.random_bool(0.8) {
            existing(rng)
        } else {
            let id = *pool.choose(rng).unwrap();
            random_case(rng, id)
        }
    };
    match rng.random_range(0..5) {
        0 => {
            let id = *pool.choose(rng).unwrap();
            Op::Create(random_case(rng, id), *roles.choose(rng).unwrap())
        }
        1 => Op::SetRole(some_user(rng), *roles.choose(rng).unwrap()),
        2 => {
            let s = [
                UserStatus::Active,
                UserStatus::Disabled,
                UserStatus::Pending,
            ];
            Op::SetStatus(some_user(rng), *s.choose(rng).unwrap())
        }
        3 => {
            let res = ["staff-page", "entry-form", "report", "ghost"];
            Op::Grant(
                some_user(rng),
                res.choose(rng).unwrap().to_string(),
                *AccessLevel::ALL.choose(rng).unwrap(),
            )
        }
        _ => {
            let id = match doc.grants.choose(rng) {
                Some(g) if rng.random_bool(0.8) => g.grant_id.clone(),
                _ => "no-such-grant".into(),
            };
            Op::Revoke(id)
        }
    }
}

fn actor(rng: &mut StdRng, gk: &Gatekeeper) -> Principal {
    let doc = gk.snapshot();
    if rng.random_bool(0.75) {
        return gk.principal_for("root").unwrap();
    }
    Principal::for_user(doc.users.choose(rng).unwrap())
}

pub fn lifecycle_state_machine() -> String {
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);
    let lengths = Uniform::new_inclusive(1, 12).unwrap();
    let (mut ops, mut ok) = (0, 0);
    for _ in 0..10_000 {
        let gk = fresh(rng.random_bool(0.5));
        // Bootstrap plus three resources.
        let mut events = 4;
        check_invariants(&gk, events);
        for _ in 0..lengths.sample(&mut rng) {
            let who = actor(&mut rng, &gk);
            let now = t0();
            let result = match random_op(&mut rng, &gk) {
                Op::Create(id, role) => gk.create_user(&who, new_user(&id, role), now).map(drop),
                Op::SetRole(id, role) => gk.set_role(&who, &id, role, now).map(drop),
                Op::SetStatus(id, s) => gk.set_status(&who, &id, s, now).map(drop),
                Op::Grant(u, r, l) => gk.grant_special(&who, &u, &r, l, None, now).map(drop),
                Op::Revoke(id) => gk.revoke_grant(&who, &id, now),
            };
            ops += 1;
            if result.is_ok() {
                ok += 1;
                events += 1;
            }
            check_invariants(&gk, events);
        }
    }
    format!("10000 sequences, {ops} operations ({ok} accepted), 0 invariant violations")
}

pub fn unique_id_flow() -> String {
    let gk = fresh(false);
    let root = gk.principal_for("root").unwrap();
    gk.create_user(&root, new_user("rjones", Role::Staff), t0())
        .unwrap();
    for spelling in ["rjones", "RJONES", "RJones", "rJoNeS"] {
        let err = gk
            .create_user(&root, new_user(spelling, Role::Guest), t0())
            .unwrap_err();
        assert!(matches!(err, Error::IdAlreadyExists), "{spelling}: {err:?}");
        assert!(
            err.to_string().contains("choose a different user-id"),
            "diagnostic: {err}"
        );
        assert_eq!(gk.validate_user_id(spelling), IdCheck::Taken);
    }

    // Random candidates: valid, invalid and case variants of taken ids.
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let alphabet: Vec<char> = "abcXYZ019._- !@é".chars().collect();
    let mut tally = [0usize; 3];
    for i in 0..1000 {
        let candidate: String = if i % 4 == 0 {
            let taken: Vec<String> = gk
                .snapshot()
                .users
                .iter()
                .map(|u| u.user_id.clone())
                .collect();
            let id = taken.choose(&mut rng).unwrap().clone();
            random_case(&mut rng, &id)
        } else {
            let len = rng.random_range(0..=70);
            (0..len)
                .map(|_| *alphabet.choose(&mut rng).unwrap())
                .collect()
        };
        let predicted = gk.validate_user_id(&candidate);
        let outcome = gk.create_user(&root, new_user(&candidate, Role::Staff), t0());
        match (&predicted, &outcome) {
            (IdCheck::Available, Ok(_)) => tally[0] += 1,
            (IdCheck::Taken, Err(Error::IdAlreadyExists)) => tally[1] += 1,
            (IdCheck::Invalid(_), Err(Error::InvalidId(_))) => tally[2] += 1,
            _ => panic!("{candidate:?}: validate said {predicted:?}, create gave {outcome:?}"),
        }
    }

    // The CLI relays the same instruction.
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("ids.json");
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_gatekeeper"))
            .args(args)
            .env("GATEKEEPER_STORE", &store)
            .env("GATEKEEPER_PASSWORD", "root-password")
            .env("GATEKEEPER_NEW_PASSWORD", "member-password")
            .env("GATEKEEPER_HASH_COST", "1")
            .output()
            .unwrap()
    };
    assert!(run(&["bootstrap", "--admin", "root"]).status.success());
    let first = run(&["--as", "root", "user", "add", "rjones", "--role", "staff"]);
    assert!(first.status.success());
    assert_eq!(String::from_utf8_lossy(&first.stdout).trim(), "rjones");
    let again = run(&["--as", "root", "user", "add", "RJones", "--role", "staff"]);
    assert_eq!(again.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&again.stderr);
    assert!(
        stderr.contains("user-id already exists; choose a different user-id"),
        "stderr: {stderr}"
    );

    format!(
        "duplicates refused in 4 casings; 1000 candidates agree ({} available, {} taken, {} invalid); CLI exit 1 with diagnostic",
        tally[0], tally[1], tally[2]
    )
}
