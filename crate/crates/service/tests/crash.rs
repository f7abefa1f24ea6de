//! Injects write failures at random points and checks that a reopened store
//! holds, for every program, exactly the state before or after the failed
//! operation, and that no program file is half written.

mod common;

use std::collections::BTreeMap;
use std::io;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::inc;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use zoea_core::compile::{compile_document, Pipeline};
use zoea_core::graph::Document;
use zoea_core::synth::{NoImports, SearchConfig};
use zoea_service::fs::{FaultHook, Stage};
use zoea_service::{Store, StoredProgram};

/// Fails the n-th stage check after being armed, once.
#[derive(Default)]
struct Countdown {
    left: AtomicUsize,
    fired: AtomicUsize,
}

impl Countdown {
    fn arm(&self, n: usize) {
        self.left.store(n, Ordering::SeqCst);
    }

    fn disarm(&self) {
        self.left.store(0, Ordering::SeqCst);
    }
}

impl FaultHook for Countdown {
    fn check(&self, _: Stage) -> io::Result<()> {
        let left = self.left.load(Ordering::SeqCst);
        if left == 0 {
            return Ok(());
        }
        self.left.store(left - 1, Ordering::SeqCst);
        if left == 1 {
            self.fired.fetch_add(1, Ordering::SeqCst);
            return Err(io::Error::other("injected failure"));
        }
        Ok(())
    }
}

/// The persistent part of a program, without timestamps.
type Snapshot = (u64, Document, Option<(Pipeline, u64)>);

fn snapshot(p: &StoredProgram) -> Snapshot {
    (p.revision, p.document.clone(), p.pipeline.clone())
}

fn state(store: &Store) -> BTreeMap<String, Snapshot> {
    store.list().iter().map(|p| (p.id.clone(), snapshot(p))).collect()
}

fn variant(id: &str, rng: &mut StdRng) -> Document {
    let start = rng.gen_range(-20..20);
    let n = rng.gen_range(2..5);
    inc(id, &(0..n).map(|i| start + 3 * i).collect::<Vec<_>>())
}

fn check_files(dir: &std::path::Path) {
    for entry in std::fs::read_dir(dir.join("programs")).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        if name.ends_with(".tmp") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        serde_json::from_str::<serde_json::Value>(&text)
            .unwrap_or_else(|e| panic!("{name} is not complete JSON: {e}"));
    }
}

#[test]
fn survives_one_hundred_injected_write_failures() {
    let dir = tempfile::tempdir().unwrap();
    let hook = Arc::new(Countdown::default());
    let (store, _) = Store::open_with(dir.path(), hook.clone()).unwrap();
    let mut store = Arc::new(store);
    let mut rng = StdRng::seed_from_u64(7);
    let pipeline = compile_document(&inc("x", &[1, 4]), &SearchConfig::default(), Arc::new(NoImports), &mut |_| {})
        .unwrap()
        .pipeline;
    let ids = ["p0", "p1", "p2", "p3"];
    let mut successes = 0;

    while hook.fired.load(Ordering::SeqCst) < 100 {
        let before = state(&store);
        let id = ids[rng.gen_range(0..ids.len())];
        // Each write passes four stages for the program file and four for
        // the index; a delete passes one, then four for the index.
        hook.arm(rng.gen_range(1..=10));
        let current = store.get(id).ok();
        let result = match (rng.gen_range(0..4), current) {
            (_, None) => store.create(variant(id, &mut rng)).map(|_| ()),
            (0, Some(p)) => store.put(id, p.revision, variant(id, &mut rng)).map(|_| ()),
            (1, Some(p)) => store.set_pipeline(id, p.revision, pipeline.clone()).map(|_| ()),
            (2, Some(_)) => store.delete(id),
            (_, Some(p)) => store.put(id, p.revision + 5, variant(id, &mut rng)).map(|_| ()),
        };
        hook.disarm();
        if result.is_ok() {
            successes += 1;
        }
        let after_op = state(&store);

        // Crash: files are checked as left, then the store is reopened.
        check_files(dir.path());
        drop(store);
        let (reopened, recovery) = Store::open_with(dir.path(), hook.clone()).unwrap();
        store = Arc::new(reopened);
        assert!(recovery.unreadable.is_empty(), "{recovery:?}");
        assert!(recovery.pipelines_dropped.is_empty(), "{recovery:?}");
        let now = state(&store);
        for id in ids {
            let got = now.get(id);
            assert!(
                got == before.get(id) || got == after_op.get(id),
                "{id} is in neither the old nor the new state"
            );
        }
        if result.is_ok() {
            assert_eq!(now, after_op);
        }

        let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("programs"))
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .filter(|n| !n.ends_with(".json"))
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
        let index: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("index.json")).unwrap()).unwrap();
        let listed: Vec<String> = index["programs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["id"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(listed, store.ids());
    }
    assert!(successes > 10, "only {successes} operations went through");
}
