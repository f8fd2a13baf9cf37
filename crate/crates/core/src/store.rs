//! Append-only annotation log.
//!
//! Each line is one record. Annotations use the pair schema
//! (`pair_id, kind, a, b, t, source`); retractions and skips are separate
//! tombstone lines so the file never needs rewriting:
//!
//! ```text
//! {"pair_id":"pair-000000","kind":"intra","a":{"image_id":"img0","x":3,"y":40},"b":{"image_id":"img0","x":60,"y":7},"t":0,"source":"human"}
//! {"retract":"pair-000000"}
//! {"skip":"pair-000001"}
//! ```
//!
//! The effective annotation set is the log replayed in order with
//! retracted pairs removed.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::types::PairAnnotation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Retraction {
    pub retract: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkipMark {
    pub skip: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StoreRecord {
    Annotation(PairAnnotation),
    Retract(Retraction),
    Skip(SkipMark),
}

impl StoreRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("store records serialize")
    }
}

pub fn parse_records(text: &str, origin: &Path) -> Result<Vec<StoreRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(origin, i + 1, e)))
        .collect()
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<StoreRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, path)
}

/// Replays records into the effective annotation list, preserving the
/// order of first appearance of each surviving annotation.
pub fn resolve_records(records: &[StoreRecord]) -> Result<Vec<PairAnnotation>> {
    let mut live: Vec<Option<PairAnnotation>> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for rec in records {
        match rec {
            StoreRecord::Annotation(a) => {
                if index.contains_key(a.pair_id.as_str()) {
                    return Err(Error::DuplicatePairId(a.pair_id.clone()));
                }
                index.insert(&a.pair_id, live.len());
                live.push(Some(a.clone()));
            }
            StoreRecord::Retract(r) => {
                if let Some(i) = index.remove(r.retract.as_str()) {
                    live[i] = None;
                }
            }
            StoreRecord::Skip(_) => {}
        }
    }
    Ok(live.into_iter().flatten().collect())
}

/// Loads the effective (tombstone-resolved) annotations of a log file.
pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<PairAnnotation>> {
    resolve_records(&read_records(path)?)
}

/// Writes a fresh annotation file, replacing any existing one.
pub fn write_annotations(path: impl AsRef<Path>, annotations: &[PairAnnotation]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for a in annotations {
        text.push_str(&serde_json::to_string(a).expect("annotation serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Default)]
struct Inner {
    file: Option<File>,
    records: Vec<StoreRecord>,
    live: HashMap<String, usize>,
}

impl Inner {
    fn write(&mut self, path: Option<&Path>, record: StoreRecord) -> Result<()> {
        if let Some(file) = self.file.as_mut() {
            let mut line = record.to_line();
            line.push('\n');
            let p = path.unwrap_or(Path::new("<store>"));
            file.write_all(line.as_bytes()).map_err(|e| Error::io(p, e))?;
            file.flush().map_err(|e| Error::io(p, e))?;
        }
        self.apply(record);
        Ok(())
    }

    fn apply(&mut self, record: StoreRecord) {
        match &record {
            StoreRecord::Annotation(a) => {
                self.live.insert(a.pair_id.clone(), self.records.len());
            }
            StoreRecord::Retract(r) => {
                self.live.remove(&r.retract);
            }
            StoreRecord::Skip(_) => {}
        }
        self.records.push(record);
    }
}

/// Append-only annotation store. Reads take a shared lock; every write is
/// serialized and flushed before the call returns.
#[derive(Debug, Default)]
pub struct AnnotationStore {
    path: Option<PathBuf>,
    inner: RwLock<Inner>,
}

impl AnnotationStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a log file and replays its records.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let records = if path.exists() {
            read_records(&path)?
        } else {
            Vec::new()
        };
        resolve_records(&records)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut inner = Inner::default();
        for r in records {
            inner.apply(r);
        }
        inner.file = Some(file);
        Ok(Self {
            path: Some(path),
            inner: RwLock::new(inner),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Validates `ann` against the manifest and appends it. A pair id may
    /// be reused only after its previous annotation was retracted.
    pub fn append(&self, ann: PairAnnotation, manifest: &DatasetManifest) -> Result<()> {
        ann.validate(manifest)?;
        let mut inner = self.inner.write().expect("store lock poisoned");
        if inner.live.contains_key(&ann.pair_id) {
            return Err(Error::DuplicatePairId(ann.pair_id));
        }
        inner.write(self.path.as_deref(), StoreRecord::Annotation(ann))
    }

    /// Writes a tombstone for a live pair and returns the retracted value.
    pub fn retract(&self, pair_id: &str) -> Result<Option<PairAnnotation>> {
        let mut inner = self.inner.write().expect("store lock poisoned");
        let Some(&i) = inner.live.get(pair_id) else {
            return Ok(None);
        };
        let StoreRecord::Annotation(ann) = inner.records[i].clone() else {
            unreachable!("live index points at an annotation record");
        };
        inner.write(
            self.path.as_deref(),
            StoreRecord::Retract(Retraction {
                retract: pair_id.to_string(),
            }),
        )?;
        Ok(Some(ann))
    }

    pub fn mark_skipped(&self, task_id: &str) -> Result<()> {
        let mut inner = self.inner.write().expect("store lock poisoned");
        inner.write(
            self.path.as_deref(),
            StoreRecord::Skip(SkipMark {
                skip: task_id.to_string(),
            }),
        )
    }

    pub fn contains(&self, pair_id: &str) -> bool {
        self.inner.read().expect("store lock poisoned").live.contains_key(pair_id)
    }

    pub fn records(&self) -> Vec<StoreRecord> {
        self.inner.read().expect("store lock poisoned").records.clone()
    }

    pub fn annotations(&self) -> Vec<PairAnnotation> {
        resolve_records(&self.records()).expect("store never holds live duplicates")
    }
}

/// Appends a validated annotation to the store.
pub fn append_annotation(
    store: &AnnotationStore,
    ann: PairAnnotation,
    manifest: &DatasetManifest,
) -> Result<()> {
    store.append(ann, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{ImageEntry, Resolution};
    use crate::types::{LabelSource, Ordinal, PairKind, PointRef};

    fn manifest() -> DatasetManifest {
        let e = |id: &str| ImageEntry {
            image_id: id.into(),
            path: format!("{id}.png"),
            width: 424,
            height: 240,
            gt_path: None,
        };
        DatasetManifest::from_entries(Resolution::default(), vec![e("img0"), e("img1")]).unwrap()
    }

    fn intra(id: &str, dx: u32) -> PairAnnotation {
        PairAnnotation::new(
            id,
            PointRef::new("img0", 100, 100),
            PointRef::new("img0", 100 + dx, 100),
            Ordinal::Equal,
            LabelSource::Human,
        )
    }

    #[test]
    fn valid_intra_pair_is_stored() {
        let store = AnnotationStore::in_memory();
        append_annotation(&store, intra("p0", 50), &manifest()).unwrap();
        assert_eq!(store.annotations(), vec![intra("p0", 50)]);
    }

    #[test]
    fn eleven_pixels_violates_twelve_pixel_rule() {
        let store = AnnotationStore::in_memory();
        let err = store.append(intra("p0", 11), &manifest()).unwrap_err();
        match err {
            Error::MinDistanceViolation { threshold, distance, .. } => {
                assert_eq!(threshold, 12.0);
                assert_eq!(distance, 11.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        store.append(intra("p1", 12), &manifest()).unwrap();
    }

    #[test]
    fn cross_kind_on_same_image_is_mismatch() {
        let mut ann = intra("p0", 50);
        ann.kind = PairKind::Cross;
        let err = AnnotationStore::in_memory().append(ann, &manifest()).unwrap_err();
        assert!(matches!(err, Error::KindMismatch(_)));
    }

    #[test]
    fn out_of_bounds_and_unknown_image() {
        let store = AnnotationStore::in_memory();
        let ann = PairAnnotation::new(
            "p0",
            PointRef::new("img0", 424, 0),
            PointRef::new("img1", 0, 0),
            Ordinal::BMore,
            LabelSource::Human,
        );
        assert!(matches!(store.append(ann, &manifest()), Err(Error::OutOfBounds { .. })));
        let ann = PairAnnotation::new(
            "p0",
            PointRef::new("img9", 0, 0),
            PointRef::new("img1", 0, 0),
            Ordinal::BMore,
            LabelSource::Human,
        );
        assert!(matches!(store.append(ann, &manifest()), Err(Error::UnknownImageId(_))));
    }

    #[test]
    fn duplicate_pair_id_rejected_until_retracted() {
        let store = AnnotationStore::in_memory();
        store.append(intra("p0", 50), &manifest()).unwrap();
        assert!(matches!(
            store.append(intra("p0", 60), &manifest()),
            Err(Error::DuplicatePairId(_))
        ));
        assert_eq!(store.retract("p0").unwrap(), Some(intra("p0", 50)));
        store.append(intra("p0", 60), &manifest()).unwrap();
        assert_eq!(store.annotations(), vec![intra("p0", 60)]);
        assert_eq!(store.records().len(), 3);
    }

    #[test]
    fn file_store_replays_after_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ann.jsonl");
        {
            let store = AnnotationStore::open(&path).unwrap();
            store.append(intra("p0", 50), &manifest()).unwrap();
            store.append(intra("p1", 70), &manifest()).unwrap();
            store.retract("p0").unwrap();
            store.mark_skipped("p2").unwrap();
        }
        let store = AnnotationStore::open(&path).unwrap();
        assert_eq!(store.annotations(), vec![intra("p1", 70)]);
        assert_eq!(store.records().len(), 4);
        assert_eq!(load_annotations(&path).unwrap(), vec![intra("p1", 70)]);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(2).unwrap() == "{\"retract\":\"p0\"}");
    }

    #[test]
    fn annotation_line_uses_integer_fields() {
        let line = StoreRecord::Annotation(intra("p0", 50)).to_line();
        assert_eq!(
            line,
            "{\"pair_id\":\"p0\",\"kind\":\"intra\",\"a\":{\"image_id\":\"img0\",\"x\":100,\"y\":100},\"b\":{\"image_id\":\"img0\",\"x\":150,\"y\":100},\"t\":0,\"source\":\"human\"}"
        );
    }
}
