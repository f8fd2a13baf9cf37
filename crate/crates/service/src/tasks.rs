//! Task pool state: leases, labels, skips and undo over an append-only
//! annotation store.
//!
//! All mutation happens under one mutex, so claiming and submitting are
//! atomic with respect to each other. Every state change that must survive
//! a restart is written to the store before the in-memory state moves.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use reltrav::pairgen::{load_tasks, LabelAccounting, PairTask, TaskStatus};
use reltrav::store::{AnnotationStore, StoreRecord};
use reltrav::{load_manifest, DatasetManifest, LabelSource, Ordinal, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const DEFAULT_LEASE: Duration = Duration::from_secs(10 * 60);

pub type ServiceResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone)]
struct Lease {
    session: String,
    expires: Instant,
}

impl Lease {
    fn live(&self, now: Instant) -> bool {
        now < self.expires
    }
}

#[derive(Debug)]
struct Slot {
    task: PairTask,
    lease: Option<Lease>,
}

#[derive(Debug, Default)]
struct State {
    slots: Vec<Slot>,
    index: HashMap<String, usize>,
    history: HashMap<String, Vec<usize>>,
}

impl State {
    fn slot(&self, task_id: &str) -> ServiceResult<usize> {
        self.index
            .get(task_id)
            .copied()
            .ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))
    }

    /// Checks that `session` may act on a pending task.
    fn check_claim(&self, i: usize, session: &str, now: Instant) -> ServiceResult<()> {
        let slot = &self.slots[i];
        let id = &slot.task.task_id;
        match slot.task.status {
            TaskStatus::Labeled => return Err(ServiceError::AlreadyLabeled(id.clone())),
            TaskStatus::Skipped => return Err(ServiceError::TaskSkipped(id.clone())),
            TaskStatus::Pending => {}
        }
        match &slot.lease {
            Some(l) if l.session == session && l.live(now) => Ok(()),
            Some(l) if l.session == session => Err(ServiceError::LeaseExpired(id.clone())),
            _ => Err(ServiceError::NotLeased(id.clone())),
        }
    }
}

/// Reference to an image the annotator needs to render a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRef {
    pub image_id: String,
    pub url: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub task: PairTask,
    pub image_a: ImageRef,
    pub image_b: ImageRef,
    pub lease_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub pending: usize,
    pub leased: usize,
    pub labeled: usize,
    pub skipped: usize,
    /// Accounting over labeled tasks only.
    pub accounting: LabelAccounting,
    pub labels_per_image: f64,
}

/// Thread-safe task server state.
#[derive(Debug)]
pub struct TaskService {
    manifest: DatasetManifest,
    store: AnnotationStore,
    lease: Duration,
    state: Mutex<State>,
}

impl TaskService {
    /// Builds the pool from `tasks` in the given order, then replays the
    /// store log so labels, undos and skips from earlier runs take effect.
    pub fn new(manifest: DatasetManifest, tasks: Vec<PairTask>, store: AnnotationStore) -> ServiceResult<Self> {
        let mut state = State::default();
        for task in tasks {
            task.validate(&manifest)?;
            if state.index.contains_key(&task.task_id) {
                return Err(reltrav::Error::DuplicatePairId(task.task_id).into());
            }
            state.index.insert(task.task_id.clone(), state.slots.len());
            state.slots.push(Slot { task, lease: None });
        }
        for rec in store.records() {
            replay(&mut state, &rec);
        }
        Ok(Self {
            manifest,
            store,
            lease: DEFAULT_LEASE,
            state: Mutex::new(state),
        })
    }

    /// Opens manifest, task list and store log from disk. The store file
    /// is created if missing.
    pub fn open(manifest: impl AsRef<Path>, tasks: impl AsRef<Path>, store: impl AsRef<Path>) -> ServiceResult<Self> {
        let manifest = load_manifest(manifest)?;
        let tasks = load_tasks(tasks)?;
        Self::new(manifest, tasks, AnnotationStore::open(store)?)
    }

    pub fn with_lease(mut self, lease: Duration) -> Self {
        self.lease = lease;
        self
    }

    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("task state lock poisoned")
    }

    fn image_ref(&self, image_id: &str) -> ServiceResult<ImageRef> {
        let e = self.manifest.require(image_id)?;
        Ok(ImageRef {
            image_id: image_id.to_string(),
            url: format!("/api/images/{image_id}"),
            width: e.width,
            height: e.height,
        })
    }

    /// Leases the first pending task, in pool order, that no session holds.
    pub fn next_task(&self, session: &str, now: Instant) -> ServiceResult<Claim> {
        let mut state = self.lock();
        let slot = state
            .slots
            .iter_mut()
            .find(|s| s.task.status == TaskStatus::Pending && !s.lease.as_ref().is_some_and(|l| l.live(now)))
            .ok_or(ServiceError::NoPendingTasks)?;
        slot.lease = Some(Lease {
            session: session.to_string(),
            expires: now + self.lease,
        });
        let task = slot.task.clone();
        drop(state);
        Ok(Claim {
            image_a: self.image_ref(&task.a.image_id)?,
            image_b: self.image_ref(&task.b.image_id)?,
            task,
            lease_seconds: self.lease.as_secs(),
        })
    }

    pub fn submit_label(&self, task_id: &str, t: i64, session: &str, now: Instant) -> ServiceResult<()> {
        let t = Ordinal::try_from(t).map_err(|_| ServiceError::InvalidLabel(t))?;
        let mut state = self.lock();
        let i = state.slot(task_id)?;
        state.check_claim(i, session, now)?;
        let ann = state.slots[i].task.clone().into_annotation(t, LabelSource::Human);
        self.store.append(ann, &self.manifest)?;
        let slot = &mut state.slots[i];
        slot.task.status = TaskStatus::Labeled;
        slot.lease = None;
        state.history.entry(session.to_string()).or_default().push(i);
        Ok(())
    }

    pub fn skip(&self, task_id: &str, session: &str, now: Instant) -> ServiceResult<()> {
        let mut state = self.lock();
        let i = state.slot(task_id)?;
        state.check_claim(i, session, now)?;
        self.store.mark_skipped(task_id)?;
        let slot = &mut state.slots[i];
        slot.task.status = TaskStatus::Skipped;
        slot.lease = None;
        Ok(())
    }

    /// Retracts the session's most recent label of this run. The task goes
    /// back to pending, leased to the same session. Returns the task id.
    pub fn undo_last(&self, session: &str, now: Instant) -> ServiceResult<String> {
        let mut state = self.lock();
        let i = state
            .history
            .get_mut(session)
            .and_then(Vec::pop)
            .ok_or(ServiceError::NothingToUndo)?;
        let id = state.slots[i].task.task_id.clone();
        self.store.retract(&id)?;
        let slot = &mut state.slots[i];
        slot.task.status = TaskStatus::Pending;
        slot.lease = Some(Lease {
            session: session.to_string(),
            expires: now + self.lease,
        });
        Ok(id)
    }

    pub fn progress(&self, now: Instant) -> Progress {
        let state = self.lock();
        let (mut pending, mut leased, mut labeled, mut skipped) = (0, 0, 0, 0);
        for s in &state.slots {
            match s.task.status {
                TaskStatus::Pending => {
                    pending += 1;
                    if s.lease.as_ref().is_some_and(|l| l.live(now)) {
                        leased += 1;
                    }
                }
                TaskStatus::Labeled => labeled += 1,
                TaskStatus::Skipped => skipped += 1,
            }
        }
        let accounting = LabelAccounting::of_kinds(
            self.manifest.len(),
            state
                .slots
                .iter()
                .filter(|s| s.task.status == TaskStatus::Labeled)
                .map(|s| s.task.kind),
        );
        Progress {
            total: state.slots.len(),
            pending,
            leased,
            labeled,
            skipped,
            labels_per_image: accounting.labels_per_image(),
            accounting,
        }
    }

    /// Snapshot of every task with its current status, in pool order.
    pub fn tasks(&self) -> Vec<PairTask> {
        self.lock().slots.iter().map(|s| s.task.clone()).collect()
    }

    /// Session currently holding a live lease on `task_id`.
    pub fn holder(&self, task_id: &str, now: Instant) -> ServiceResult<Option<String>> {
        let state = self.lock();
        let i = state.slot(task_id)?;
        Ok(state.slots[i]
            .lease
            .as_ref()
            .filter(|l| l.live(now) && state.slots[i].task.status == TaskStatus::Pending)
            .map(|l| l.session.clone()))
    }

    /// The image as an 8-bit RGB PNG.
    pub fn image_png(&self, image_id: &str) -> ServiceResult<Vec<u8>> {
        let entry = self
            .manifest
            .get(image_id)
            .ok_or_else(|| ServiceError::UnknownImage(image_id.to_string()))?;
        let img = RgbImage::load(self.manifest.resolve(&entry.path))?.to_rgb8();
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png)
            .map_err(|e| ServiceError::Encode(image_id.to_string(), e.to_string()))?;
        Ok(out.into_inner())
    }
}

fn replay(state: &mut State, rec: &StoreRecord) {
    let (id, from, to) = match rec {
        StoreRecord::Annotation(a) => (&a.pair_id, TaskStatus::Pending, TaskStatus::Labeled),
        StoreRecord::Retract(r) => (&r.retract, TaskStatus::Labeled, TaskStatus::Pending),
        StoreRecord::Skip(s) => (&s.skip, TaskStatus::Pending, TaskStatus::Skipped),
    };
    if let Some(&i) = state.index.get(id.as_str()) {
        let task = &mut state.slots[i].task;
        if task.status == from {
            task.status = to;
        }
    }
}
