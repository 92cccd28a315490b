use chrono::{DateTime, Duration, Utc};
use gatekeeper_core::{
    baseline_allows, decide, visible_menu, AccessLevel, DataClass, MenuGroup, Principal, Resource,
    Role, SpecialGrant, StoreDocument, UserRecord, UserStatus,
};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::gen::{self, t0};
use crate::oracle::{agrees, oracle, table_allows, BASELINE};

pub fn baseline_matrix() -> String {
    let mut cells = 0;
    let mut allowed = 0;
    for (role, _) in BASELINE {
        for class in DataClass::ALL {
            for level in AccessLevel::ALL {
                let want = table_allows(role, class, level);
                let got = baseline_allows(role, class, level);
                assert_eq!(got, want, "baseline({role}, {class}, {level})");
                cells += 1;
                allowed += usize::from(got);
            }
        }
    }
    assert_eq!(cells, 60);
    format!("{cells} cells match, {allowed} allow")
}

struct Tally {
    universes: usize,
    checks: usize,
}

impl Tally {
    fn check(&mut self, doc: &StoreDocument, now: DateTime<Utc>) {
        self.universes += 1;
        let who: Vec<Option<&UserRecord>> = std::iter::once(None)
            .chain(doc.users.iter().map(Some))
            .collect();
        for w in who {
            let principal = w.map_or_else(Principal::anonymous, Principal::for_user);
            for r in &doc.resources {
                for level in AccessLevel::ALL {
                    let got = decide(doc, &principal, &r.resource_id, level, now)
                        .expect("resource exists");
                    let want = oracle(doc, w, r, level, now);
                    if !agrees(&want, &got) {
                        panic!(
                            "mismatch for {:?} on {} at {level}: engine {:?}/{}, oracle {want:?}\nuniverse: {doc:#?}",
                            principal.user_id, r.resource_id, got.verdict, got.reason
                        );
                    }
                    self.checks += 1;
                }
            }
        }
    }
}

/// Expiry options for one grant slot: absent, or present with one of four
/// expiries relative to the evaluation instant.
fn expiry_options(now: DateTime<Utc>) -> [Option<Option<DateTime<Utc>>>; 5] {
    [
        None,
        Some(None),
        Some(Some(now - Duration::seconds(1))),
        Some(Some(now)),
        Some(Some(now + Duration::seconds(1))),
    ]
}

/// Every user profile against every resource kind and every combination of
/// read/write grant with every expiry case. Each universe also holds a decoy
/// with its own grant, and is evaluated for the anonymous visitor too.
fn pairwise(tally: &mut Tally) {
    let now = t0();
    for (role, status) in gen::user_profiles() {
        for (k, kind) in gen::resource_kinds().into_iter().enumerate() {
            for (ri, read) in expiry_options(now).into_iter().enumerate() {
                for (wi, write) in expiry_options(now).into_iter().enumerate() {
                    let res = gen::resource(&format!("r{k}"), kind);
                    // Grants name the user in a different casing half the time.
                    let spelled = if (ri + wi) % 2 == 0 {
                        "subject"
                    } else {
                        "SUBJECT"
                    };
                    let mut grants = vec![gen::grant(
                        "g-decoy",
                        "decoy",
                        &res.resource_id,
                        AccessLevel::Write,
                        None,
                    )];
                    if let Some(e) = read {
                        grants.push(gen::grant(
                            "g-read",
                            spelled,
                            &res.resource_id,
                            AccessLevel::Read,
                            e,
                        ));
                    }
                    if let Some(e) = write {
                        grants.push(gen::grant(
                            "g-write",
                            spelled,
                            &res.resource_id,
                            AccessLevel::Write,
                            e,
                        ));
                    }
                    let doc = StoreDocument {
                        users: vec![
                            gen::user("decoy", Role::Staff, UserStatus::Active),
                            gen::user("Subject", role, status),
                        ],
                        grants,
                        resources: vec![res],
                        ..StoreDocument::default()
                    };
                    tally.check(&doc, now);
                }
            }
        }
    }
}

/// Fixed user profiles and resource kinds per index; every subset of at
/// most four grants over the (user, resource, level) slots.
fn placements(
    tally: &mut Tally,
    profiles: &[(Role, UserStatus); 4],
    kinds: &[(DataClass, MenuGroup, AccessLevel); 4],
) {
    let now = t0();
    for n_users in 0..=4 {
        for n_res in 1..=4 {
            let users: Vec<UserRecord> = (0..n_users)
                .map(|i| gen::user(&format!("u{i}"), profiles[i].0, profiles[i].1))
                .collect();
            let resources: Vec<Resource> = (0..n_res)
                .map(|j| gen::resource(&format!("r{j}"), kinds[j]))
                .collect();
            let mut slots = Vec::new();
            for u in &users {
                for r in &resources {
                    for level in [AccessLevel::Read, AccessLevel::Write] {
                        if u.role == Role::Guest && level == AccessLevel::Write {
                            continue;
                        }
                        slots.push((u.user_id.clone(), r.resource_id.clone(), level));
                    }
                }
            }
            let mut doc = StoreDocument {
                users,
                resources,
                ..StoreDocument::default()
            };
            for_each_subset(slots.len(), 4, &mut |chosen| {
                doc.grants = chosen
                    .iter()
                    .map(|&s| {
                        let (u, r, l) = &slots[s];
                        gen::grant(&format!("g{s:02}"), u, r, *l, None)
                    })
                    .collect::<Vec<SpecialGrant>>();
                tally.check(&doc, now);
            });
        }
    }
}

fn for_each_subset(n: usize, max: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        f(cur);
        if cur.len() == max {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, max, cur, f);
            cur.pop();
        }
    }
    rec(0, n, max, &mut Vec::new(), f);
}

pub fn oracle_equivalence() -> String {
    let mut tally = Tally {
        universes: 0,
        checks: 0,
    };
    pairwise(&mut tally);
    let pairwise_universes = tally.universes;

    use AccessLevel::{Admin, Read, Write};
    use DataClass::{General, Managerial, Public, Sensitive};
    use MenuGroup::{AdminMenu, ManagerReports, PublicPages, StaffMenu};
    use Role::{Administrator, Guest, Manager, Staff};
    use UserStatus::{Active, Disabled, Pending};
    let layouts = [
        (
            [
                (Guest, Active),
                (Staff, Active),
                (Manager, Active),
                (Administrator, Active),
            ],
            [
                (General, StaffMenu, Read),
                (Managerial, ManagerReports, Read),
                (Sensitive, StaffMenu, Write),
                (Public, PublicPages, Read),
            ],
        ),
        (
            [
                (Guest, Pending),
                (Staff, Disabled),
                (Manager, Active),
                (Guest, Active),
            ],
            [
                (Managerial, ManagerReports, Write),
                (Public, PublicPages, Read),
                (General, StaffMenu, Read),
                (Sensitive, AdminMenu, Admin),
            ],
        ),
        (
            [
                (Staff, Active),
                (Staff, Active),
                (Administrator, Disabled),
                (Manager, Pending),
            ],
            [
                (Sensitive, ManagerReports, Read),
                (General, StaffMenu, Write),
                (Managerial, ManagerReports, Read),
                (General, StaffMenu, Read),
            ],
        ),
        (
            [
                (Manager, Active),
                (Guest, Active),
                (Guest, Active),
                (Staff, Pending),
            ],
            [
                (Sensitive, StaffMenu, Read),
                (Sensitive, ManagerReports, Write),
                (Public, PublicPages, Read),
                (Managerial, StaffMenu, Read),
            ],
        ),
    ];
    for (profiles, kinds) in &layouts {
        placements(&mut tally, profiles, kinds);
    }
    let enumerated = tally.universes - pairwise_universes;

    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    for _ in 0..1000 {
        let doc = gen::random_store(&mut rng, 6, 8, 10);
        let now = gen::random_now(&mut rng, &doc);
        tally.check(&doc, now);
    }
    format!(
        "{} universes ({pairwise_universes} pairwise, {enumerated} enumerated, 1000 random), {} decisions, 0 mismatches",
        tally.universes, tally.checks
    )
}

pub fn menu_consistency() -> String {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let mut checks = 0;
    for _ in 0..500 {
        let doc = gen::random_store(&mut rng, 6, 8, 10);
        let now = gen::random_now(&mut rng, &doc);
        let who = std::iter::once(Principal::anonymous())
            .chain(doc.users.iter().map(Principal::for_user));
        for p in who {
            let menu = visible_menu(&doc, &p, now);
            let order: Vec<usize> = menu
                .groups
                .iter()
                .map(|s| MenuGroup::ALL.iter().position(|g| *g == s.group).unwrap())
                .collect();
            assert!(
                order.windows(2).all(|w| w[0] < w[1]),
                "groups out of order: {order:?}"
            );
            for section in &menu.groups {
                assert!(
                    !section.items.is_empty(),
                    "empty group {} listed",
                    section.group
                );
                let keys: Vec<(String, &str)> = section
                    .items
                    .iter()
                    .map(|i| (i.display_name.to_lowercase(), i.resource_id.as_str()))
                    .collect();
                assert!(
                    keys.windows(2).all(|w| w[0] <= w[1]),
                    "items out of order in {}",
                    section.group
                );
            }
            for r in &doc.resources {
                let allowed = decide(&doc, &p, &r.resource_id, r.required_level, now)
                    .unwrap()
                    .is_allowed();
                let listed = menu.groups.iter().any(|s| {
                    s.group == r.menu_group
                        && s.items.iter().any(|i| i.resource_id == r.resource_id)
                });
                assert_eq!(
                    listed, allowed,
                    "{:?} / {}: listed {listed}, allowed {allowed}",
                    p.user_id, r.resource_id
                );
                checks += 1;
            }
        }
    }
    format!("500 stores, {checks} (principal, resource) pairs, 0 violations")
}
