//! A scripted annotator against the task service, in process: claim,
//! label, skip, undo, and a restart that replays the log.
//!
//!     cargo run -p reltrav-service --example label_session

use std::time::Instant;

use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav_service::{ServiceError, TaskService};

fn main() -> Result<(), ServiceError> {
    let dir = std::env::temp_dir().join("reltrav-session");
    let _ = std::fs::remove_dir_all(&dir);
    let paths = build_synth_dataset(5, 4, &SynthConfig::default())?.write(&dir)?;
    let log = dir.join("human.jsonl");
    let now = Instant::now();

    {
        let svc = TaskService::open(&paths.manifest, &paths.tasks, &log)?;
        for t in [1, 0, -1] {
            let claim = svc.next_task("alice", now)?;
            let task = &claim.task;
            println!(
                "{} {:?}: a=({}, {}) in {}, b=({}, {}) in {} -> t={t}",
                task.task_id, task.kind, task.a.x, task.a.y, task.a.image_id, task.b.x, task.b.y, task.b.image_id
            );
            svc.submit_label(&task.task_id, t, "alice", now)?;
        }
        let undone = svc.undo_last("alice", now)?;
        println!("undo {undone}; resubmitting as equal");
        svc.submit_label(&undone, 0, "alice", now)?;

        let claim = svc.next_task("bob", now)?;
        svc.skip(&claim.task.task_id, "bob", now)?;
        if let Err(e) = svc.undo_last("bob", now) {
            println!("bob: {} ({})", e.code(), e);
        }
        println!("{}", serde_json::to_string_pretty(&svc.progress(now)).expect("serializes"));
    }

    let again = TaskService::open(&paths.manifest, &paths.tasks, &log)?;
    let p = again.progress(now);
    println!("after restart: labeled {}, skipped {}, pending {}", p.labeled, p.skipped, p.pending);
    println!("log: {}", log.display());
    Ok(())
}
