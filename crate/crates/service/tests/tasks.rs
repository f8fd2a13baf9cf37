use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use reltrav::pairgen::{PairTask, TaskStatus};
use reltrav::store::{read_records, resolve_records, AnnotationStore};
use reltrav::synthworld::{build_synth_dataset, SynthConfig, SynthDataset};
use reltrav::PairKind;
use reltrav_service::{ServiceError, TaskService, DEFAULT_LEASE};

fn dataset(n: usize) -> SynthDataset {
    build_synth_dataset(7, n, &SynthConfig::default()).unwrap()
}

fn service(n: usize) -> TaskService {
    let ds = dataset(n);
    TaskService::new(ds.manifest, ds.tasks, AnnotationStore::in_memory()).unwrap()
}

fn single_task_service() -> TaskService {
    let ds = dataset(2);
    let task = ds.tasks.into_iter().next().unwrap();
    TaskService::new(ds.manifest, vec![task], AnnotationStore::in_memory()).unwrap()
}

#[test]
fn single_pending_task_is_leased() {
    let svc = single_task_service();
    let now = Instant::now();
    let claim = svc.next_task("s1", now).unwrap();
    assert_eq!(claim.task.task_id, "pair-000000");
    assert_eq!(svc.holder("pair-000000", now).unwrap().as_deref(), Some("s1"));
    assert!(matches!(svc.next_task("s2", now), Err(ServiceError::NoPendingTasks)));
}

#[test]
fn tasks_come_in_pool_order() {
    let svc = service(3);
    let now = Instant::now();
    let ids: Vec<_> = (0..6).map(|i| svc.next_task(&format!("s{i}"), now).unwrap().task.task_id).collect();
    let expected: Vec<_> = svc.tasks().into_iter().map(|t| t.task_id).collect();
    assert_eq!(ids, expected);
}

#[test]
fn all_labeled_means_no_pending() {
    let svc = service(2);
    let now = Instant::now();
    for _ in 0..4 {
        let c = svc.next_task("s", now).unwrap();
        svc.submit_label(&c.task.task_id, 1, "s", now).unwrap();
    }
    assert!(matches!(svc.next_task("s", now), Err(ServiceError::NoPendingTasks)));
}

#[test]
fn equality_label_is_stored_as_human() {
    let svc = single_task_service();
    let now = Instant::now();
    let c = svc.next_task("s", now).unwrap();
    svc.submit_label(&c.task.task_id, 0, "s", now).unwrap();
    let anns = svc.store().annotations();
    assert_eq!(anns.len(), 1);
    assert_eq!(anns[0].t, reltrav::Ordinal::Equal);
    assert_eq!(anns[0].source, reltrav::LabelSource::Human);
    assert_eq!(svc.tasks()[0].status, TaskStatus::Labeled);
}

#[test]
fn submit_errors() {
    let svc = service(2);
    let now = Instant::now();
    let c = svc.next_task("s", now).unwrap();
    let id = c.task.task_id.as_str();
    assert!(matches!(svc.submit_label(id, 2, "s", now), Err(ServiceError::InvalidLabel(2))));
    assert!(matches!(svc.submit_label("nope", 1, "s", now), Err(ServiceError::UnknownTask(_))));
    assert!(matches!(svc.submit_label(id, 1, "other", now), Err(ServiceError::NotLeased(_))));
    svc.submit_label(id, -1, "s", now).unwrap();
    assert!(matches!(svc.submit_label(id, -1, "s", now), Err(ServiceError::AlreadyLabeled(_))));
}

#[test]
fn lease_expires_after_ten_minutes() {
    assert_eq!(DEFAULT_LEASE, Duration::from_secs(600));
    let svc = single_task_service();
    let t0 = Instant::now();
    let c = svc.next_task("s1", t0).unwrap();
    let late = t0 + DEFAULT_LEASE;
    assert!(matches!(
        svc.submit_label(&c.task.task_id, 1, "s1", late),
        Err(ServiceError::LeaseExpired(_))
    ));
    let again = svc.next_task("s2", late).unwrap();
    assert_eq!(again.task.task_id, c.task.task_id);
    assert!(matches!(
        svc.submit_label(&c.task.task_id, 1, "s1", late),
        Err(ServiceError::NotLeased(_))
    ));
    svc.submit_label(&c.task.task_id, 1, "s2", late).unwrap();
}

#[test]
fn undo_returns_task_to_pending() {
    let svc = single_task_service();
    let now = Instant::now();
    assert!(matches!(svc.undo_last("fresh", now), Err(ServiceError::NothingToUndo)));
    let c = svc.next_task("s", now).unwrap();
    svc.submit_label(&c.task.task_id, 1, "s", now).unwrap();
    assert_eq!(svc.undo_last("s", now).unwrap(), c.task.task_id);
    assert_eq!(svc.tasks()[0].status, TaskStatus::Pending);
    assert!(svc.store().annotations().is_empty());
    assert!(matches!(svc.undo_last("s", now), Err(ServiceError::NothingToUndo)));
}

#[test]
fn undo_then_resubmit_keeps_only_new_label() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("labels.jsonl");
    let ds = dataset(3);
    let svc = TaskService::new(ds.manifest, ds.tasks, AnnotationStore::open(&log).unwrap()).unwrap();
    let now = Instant::now();
    // Scripted intent: what the annotator finally meant for each task.
    let mut intent: BTreeMap<String, i64> = BTreeMap::new();
    for t in [-1, 0, 1] {
        let c = svc.next_task("s", now).unwrap();
        svc.submit_label(&c.task.task_id, t, "s", now).unwrap();
        intent.insert(c.task.task_id, t);
    }
    let undone = svc.undo_last("s", now).unwrap();
    intent.remove(&undone);
    svc.submit_label(&undone, -1, "s", now).unwrap();
    intent.insert(undone.clone(), -1);
    let undone2 = svc.undo_last("s", now).unwrap();
    assert_eq!(undone2, undone);
    svc.submit_label(&undone, 0, "s", now).unwrap();
    intent.insert(undone, 0);

    // Independent replay of the raw log.
    let replayed: BTreeMap<String, i64> = resolve_records(&read_records(&log).unwrap())
        .unwrap()
        .into_iter()
        .map(|a| (a.pair_id, i64::from(a.t)))
        .collect();
    assert_eq!(replayed, intent);
}

#[test]
fn parallel_claims_are_disjoint() {
    let svc = Arc::new(service(60));
    let now = Instant::now();
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let svc = Arc::clone(&svc);
            thread::spawn(move || svc.next_task(&format!("session-{i}"), now).map(|c| c.task.task_id))
        })
        .collect();
    let ids: Vec<String> = handles.into_iter().map(|h| h.join().unwrap().unwrap()).collect();
    let unique: HashSet<_> = ids.iter().collect();
    assert_eq!(unique.len(), 100);
}

#[test]
fn parallel_claims_exhaust_a_small_pool() {
    let svc = Arc::new(service(20));
    let now = Instant::now();
    let results: Vec<_> = (0..100)
        .map(|i| {
            let svc = Arc::clone(&svc);
            thread::spawn(move || svc.next_task(&format!("session-{i}"), now).map(|c| c.task.task_id))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|h| h.join().unwrap())
        .collect();
    let won: HashSet<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    assert_eq!(won.len(), 40);
    let lost = results.iter().filter(|r| matches!(r, Err(ServiceError::NoPendingTasks))).count();
    assert_eq!(lost, 60);
}

#[test]
fn progress_counts_and_accounting() {
    let n = 4;
    let svc = service(n);
    let now = Instant::now();
    let p = svc.progress(now);
    assert_eq!((p.total, p.pending, p.labeled, p.skipped), (2 * n, 2 * n, 0, 0));

    let c = svc.next_task("s", now).unwrap();
    svc.skip(&c.task.task_id, "s", now).unwrap();
    assert_eq!(svc.progress(now).skipped, 1);
    assert!(matches!(
        svc.submit_label(&c.task.task_id, 1, "s", now),
        Err(ServiceError::TaskSkipped(_))
    ));

    let svc = service(n);
    while let Ok(c) = svc.next_task("s", now) {
        svc.submit_label(&c.task.task_id, 1, "s", now).unwrap();
    }
    let p = svc.progress(now);
    assert_eq!(p.labeled, 2 * n);
    assert_eq!(p.pending, 0);
    // One intra and one cross label per image: 3 labels for every 2 images.
    assert_eq!(p.accounting.equivalent_labels * 2, 3 * n);
    assert_eq!(p.labels_per_image, 1.5);
}

#[test]
fn restart_reproduces_task_states() {
    let dir = tempfile::tempdir().unwrap();
    let paths = dataset(5).write(dir.path()).unwrap();
    let log = dir.path().join("human.jsonl");
    let now = Instant::now();
    let before: Vec<PairTask> = {
        let svc = TaskService::open(&paths.manifest, &paths.tasks, &log).unwrap();
        for (i, t) in [1, 0, -1, 1, 0].into_iter().enumerate() {
            let c = svc.next_task("s", now).unwrap();
            if i == 2 {
                svc.skip(&c.task.task_id, "s", now).unwrap();
            } else {
                svc.submit_label(&c.task.task_id, t, "s", now).unwrap();
            }
        }
        svc.undo_last("s", now).unwrap();
        svc.tasks()
    };
    let svc = TaskService::open(&paths.manifest, &paths.tasks, &log).unwrap();
    assert_eq!(svc.tasks(), before);
    let counts = svc.progress(now);
    assert_eq!((counts.labeled, counts.skipped), (3, 1));
}

#[test]
fn image_payload_is_rgb8_png() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(2);
    let paths = ds.write(dir.path()).unwrap();
    let svc = TaskService::open(&paths.manifest, &paths.tasks, dir.path().join("h.jsonl")).unwrap();
    let id = &ds.manifest.images()[0].image_id;
    let png = svc.image_png(id).unwrap();
    let img = image::load_from_memory(&png).unwrap();
    assert_eq!(img.color(), image::ColorType::Rgb8);
    assert_eq!(img.width(), ds.manifest.images()[0].width);
    assert!(matches!(svc.image_png("missing"), Err(ServiceError::UnknownImage(_))));
}

#[test]
fn cross_tasks_reference_two_images() {
    let svc = service(2);
    let now = Instant::now();
    let _intra = svc.next_task("s", now).unwrap();
    let cross = svc.next_task("s", now).unwrap();
    assert_eq!(cross.task.kind, PairKind::Cross);
    assert_ne!(cross.image_a.image_id, cross.image_b.image_id);
    assert_eq!(cross.image_b.url, format!("/api/images/{}", cross.image_b.image_id));
}
