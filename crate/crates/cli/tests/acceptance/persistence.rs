use std::panic::{self, AssertUnwindSafe};

use chrono::Duration;
use gatekeeper_core::store::{self, to_canonical_json};
use gatekeeper_core::{Gatekeeper, NewUser, Role, UserStatus};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use crate::gen::{self, t0};

fn round_trips(dir: &std::path::Path) -> usize {
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    for i in 0..200 {
        let doc = gen::random_store(&mut rng, 6, 8, 10);
        let path = dir.join(format!("rt-{i}.json"));
        store::save(&doc, &path).unwrap();
        let loaded = store::load(&path).unwrap();
        assert_eq!(loaded, doc, "store {i} changed across save/load");
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(
            bytes,
            to_canonical_json(&loaded).unwrap().into_bytes(),
            "store {i} not canonical"
        );
    }
    200
}

fn mutate(rng: &mut StdRng, original: &[u8]) -> Vec<u8> {
    let mut bytes = original.to_vec();
    let edits = rng.random_range(1..=4);
    for _ in 0..edits {
        if bytes.is_empty() {
            bytes.push(b'{');
            continue;
        }
        let at = rng.random_range(0..bytes.len());
        match rng.random_range(0..6) {
            0 => bytes[at] ^= 1 << rng.random_range(0..8),
            1 => bytes[at] = *b"{}[]\":,0-9ntfe \\".choose(rng).unwrap(),
            2 => bytes.truncate(at),
            3 => {
                bytes.remove(at);
            }
            4 => {
                let end = (at + rng.random_range(1..64)).min(bytes.len());
                let chunk = bytes[at..end].to_vec();
                let to = rng.random_range(0..=bytes.len());
                bytes.splice(to..to, chunk);
            }
            _ => bytes[at] = rng.random(),
        }
    }
    bytes
}

fn fuzz_loader(dir: &std::path::Path) -> (usize, usize) {
    let mut rng = StdRng::seed_from_u64(0x5eed_0077);
    let path = dir.join("fuzz.json");
    let mut accepted = 0;
    for i in 0..1000 {
        let doc = gen::random_store(&mut rng, 4, 4, 4);
        let original = to_canonical_json(&doc).unwrap().into_bytes();
        let mutant = mutate(&mut rng, &original);
        std::fs::write(&path, &mutant).unwrap();
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| store::load(&path)));
        match outcome {
            Err(_) => panic!(
                "loader panicked on mutant {i}: {:?}",
                String::from_utf8_lossy(&mutant)
            ),
            Ok(Ok(loaded)) => {
                assert!(
                    loaded.validate().is_ok(),
                    "mutant {i} loaded but is invalid"
                );
                accepted += 1;
            }
            Ok(Err(_)) => {}
        }
    }
    (1000, accepted)
}

fn faulted_saves(dir: &std::path::Path) -> usize {
    let path = dir.join("faulted.json");
    let admin = NewUser {
        user_id: "root".into(),
        password: "root-password".into(),
        role: Role::Administrator,
        hint_question: "q".into(),
        hint_answer: "a".into(),
    };
    let gk = Gatekeeper::bootstrap(Some(&path), Default::default(), admin, t0(), 1).unwrap();
    let root = gk.principal_for("root").unwrap();
    let mut faults = 0;
    for i in 0..50 {
        let before = std::fs::read(&path).unwrap();
        let snapshot = gk.snapshot();
        gk.inject_save_fault();
        let id = format!("user{i:02}");
        let new = NewUser {
            user_id: id.clone(),
            password: format!("{id}-password"),
            role: Role::Staff,
            hint_question: "q".into(),
            hint_answer: "a".into(),
        };
        assert!(
            gk.create_user(&root, new.clone(), t0()).is_err(),
            "faulted save reported success"
        );
        faults += 1;
        assert_eq!(
            std::fs::read(&path).unwrap(),
            before,
            "prior snapshot altered by failed save"
        );
        assert_eq!(*gk.snapshot(), *snapshot, "failed save was published");
        assert_eq!(store::load(&path).unwrap(), *snapshot);

        // The next save goes through and the file moves forward.
        gk.create_user(&root, new, t0()).unwrap();
        if i % 5 == 0 {
            gk.set_status(
                &root,
                &id,
                UserStatus::Disabled,
                t0() + Duration::seconds(i),
            )
            .unwrap();
        }
        assert_eq!(store::load(&path).unwrap(), *gk.snapshot());
    }
    let reopened = Gatekeeper::open(&path).unwrap();
    assert_eq!(*reopened.snapshot(), *gk.snapshot());
    let leftovers = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(Result::ok)
        .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
        .count();
    assert_eq!(leftovers, 0, "temporary files left behind");
    faults
}

pub fn persistence() -> String {
    let dir = tempfile::tempdir().unwrap();
    let trips = round_trips(dir.path());
    let (mutants, accepted) = fuzz_loader(dir.path());
    let faults = faulted_saves(dir.path());
    format!(
        "{trips} round trips identical; {mutants} mutants loaded without panic ({accepted} still valid); {faults} faulted saves left the prior snapshot intact"
    )
}
