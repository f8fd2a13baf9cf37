//! Random operation sequences against the task service.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use reltrav::pairgen::TaskStatus;
use reltrav::store::{read_records, resolve_records, AnnotationStore};
use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav_service::TaskService;

#[derive(Debug, Clone)]
enum Op {
    Claim(usize),
    Label(usize, i64),
    Skip(usize),
    Undo(usize),
    Wait(u64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0..3usize).prop_map(Op::Claim),
        3 => (0..3usize, -1i64..=1).prop_map(|(s, t)| Op::Label(s, t)),
        1 => (0..3usize).prop_map(Op::Skip),
        2 => (0..3usize).prop_map(Op::Undo),
        1 => (0..400u64).prop_map(Op::Wait),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn log_replay_matches_memory(ops in prop::collection::vec(op(), 1..60)) {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.jsonl");
        let ds = build_synth_dataset(11, 4, &SynthConfig::default()).unwrap();
        let svc = TaskService::new(ds.manifest.clone(), ds.tasks.clone(), AnnotationStore::open(&log).unwrap()).unwrap();
        let mut now = Instant::now();
        let mut held: Vec<Option<String>> = vec![None; 3];
        for op in ops {
            match op {
                Op::Claim(s) => {
                    let live_before: HashSet<String> = svc
                        .tasks()
                        .into_iter()
                        .filter(|t| svc.holder(&t.task_id, now).unwrap().is_some())
                        .map(|t| t.task_id)
                        .collect();
                    if let Ok(c) = svc.next_task(&format!("s{s}"), now) {
                        // Lease exclusivity: a live lease is never handed out twice.
                        prop_assert!(!live_before.contains(&c.task.task_id));
                        held[s] = Some(c.task.task_id);
                    }
                }
                Op::Label(s, t) => {
                    if let Some(id) = held[s].take() {
                        let _ = svc.submit_label(&id, t, &format!("s{s}"), now);
                    }
                }
                Op::Skip(s) => {
                    if let Some(id) = held[s].take() {
                        let _ = svc.skip(&id, &format!("s{s}"), now);
                    }
                }
                Op::Undo(s) => {
                    if let Ok(id) = svc.undo_last(&format!("s{s}"), now) {
                        held[s] = Some(id);
                    }
                }
                Op::Wait(secs) => now += Duration::from_secs(secs),
            }
        }

        // No task is labeled twice in the resolved store, and the labeled
        // tasks are exactly the live annotations.
        let live = resolve_records(&read_records(&log).unwrap()).unwrap();
        let ids: HashSet<_> = live.iter().map(|a| a.pair_id.clone()).collect();
        prop_assert_eq!(ids.len(), live.len());
        let labeled: HashSet<_> = svc
            .tasks()
            .into_iter()
            .filter(|t| t.status == TaskStatus::Labeled)
            .map(|t| t.task_id)
            .collect();
        prop_assert_eq!(&labeled, &ids);

        // Crash recovery: a fresh service over the same log agrees.
        let before = svc.tasks();
        drop(svc);
        let again = TaskService::new(ds.manifest, ds.tasks, AnnotationStore::open(&log).unwrap()).unwrap();
        prop_assert_eq!(again.tasks(), before);
    }
}
