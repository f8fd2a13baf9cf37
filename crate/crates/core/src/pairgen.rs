//! Random pair-task generation for the sparse labeling protocol and
//! tier-based automatic labeling.
//!
//! Each image receives one intra-image pair and one cross-image pair whose
//! first point lies in the image. Intra pairs are rejection-sampled until
//! the points are at least 5% of `min(W, H)` apart, which keeps the draw
//! uniform over the admissible set.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::raster::load_class_map;
use crate::rng::{self, Rng};
use crate::types::{min_pair_distance, LabelSource, Ordinal, PairAnnotation, PairKind, PointRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Labeled,
    Skipped,
}

/// An unlabeled pair awaiting an ordinal judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairTask {
    #[serde(rename = "pair_id")]
    pub task_id: String,
    pub kind: PairKind,
    pub a: PointRef,
    pub b: PointRef,
    pub status: TaskStatus,
}

impl PairTask {
    pub fn pending(task_id: impl Into<String>, a: PointRef, b: PointRef) -> Self {
        let kind = PairKind::of(&a, &b);
        Self {
            task_id: task_id.into(),
            kind,
            a,
            b,
            status: TaskStatus::Pending,
        }
    }

    /// Pending tasks may become labeled or skipped; nothing else moves.
    pub fn transition(&mut self, to: TaskStatus) -> Result<()> {
        match (self.status, to) {
            (TaskStatus::Pending, TaskStatus::Labeled | TaskStatus::Skipped) => {
                self.status = to;
                Ok(())
            }
            (from, to) => Err(Error::Config(format!(
                "task {} cannot move from {from:?} to {to:?}",
                self.task_id
            ))),
        }
    }

    pub fn into_annotation(self, t: Ordinal, source: LabelSource) -> PairAnnotation {
        PairAnnotation {
            pair_id: self.task_id,
            kind: self.kind,
            a: self.a,
            b: self.b,
            t,
            source,
        }
    }

    pub fn validate(&self, manifest: &DatasetManifest) -> Result<()> {
        crate::types::validate_geometry(&self.task_id, self.kind, &self.a, &self.b, manifest)
    }
}

pub fn sample_uniform_point(image_id: &str, width: u32, height: u32, rng: &mut Rng) -> PointRef {
    PointRef::new(image_id, rng.gen_range(0..width), rng.gen_range(0..height))
}

/// With probability `bottom_fraction` the point is uniform over rows
/// `y >= height / 2`, otherwise uniform over the whole image.
pub fn sample_biased_point(
    image_id: &str,
    width: u32,
    height: u32,
    rng: &mut Rng,
    bottom_fraction: f64,
) -> PointRef {
    let x = rng.gen_range(0..width);
    let y = if rng.gen_bool(bottom_fraction.clamp(0.0, 1.0)) {
        rng.gen_range(height.div_ceil(2)..height)
    } else {
        rng.gen_range(0..height)
    };
    PointRef::new(image_id, x, y)
}

fn sample_point(image_id: &str, w: u32, h: u32, rng: &mut Rng, bias: Option<f64>) -> PointRef {
    match bias {
        Some(f) => sample_biased_point(image_id, w, h, rng, f),
        None => sample_uniform_point(image_id, w, h, rng),
    }
}

/// Two points in one image, resampled until they satisfy the minimum
/// distance rule.
pub fn sample_intra_pair(image_id: &str, width: u32, height: u32, rng: &mut Rng) -> (PointRef, PointRef) {
    sample_intra_pair_biased(image_id, width, height, rng, None)
}

pub fn sample_intra_pair_biased(
    image_id: &str,
    width: u32,
    height: u32,
    rng: &mut Rng,
    bias: Option<f64>,
) -> (PointRef, PointRef) {
    let threshold = min_pair_distance(width, height);
    loop {
        let a = sample_point(image_id, width, height, rng, bias);
        let b = sample_point(image_id, width, height, rng, bias);
        if a.distance(&b) >= threshold {
            return (a, b);
        }
    }
}

/// Point a uniform in `image_id`, partner image uniform over the others.
pub fn sample_cross_pair(
    manifest: &DatasetManifest,
    image_id: &str,
    rng: &mut Rng,
) -> Result<(PointRef, PointRef)> {
    sample_cross_pair_biased(manifest, image_id, rng, None)
}

pub fn sample_cross_pair_biased(
    manifest: &DatasetManifest,
    image_id: &str,
    rng: &mut Rng,
    bias: Option<f64>,
) -> Result<(PointRef, PointRef)> {
    if manifest.len() < 2 {
        return Err(Error::SingleImageDataset);
    }
    let own = manifest
        .position(image_id)
        .ok_or_else(|| Error::UnknownImageId(image_id.to_string()))?;
    let entry = &manifest.images()[own];
    let a = sample_point(image_id, entry.width, entry.height, rng, bias);
    let mut j = rng.gen_range(0..manifest.len() - 1);
    if j >= own {
        j += 1;
    }
    let partner = &manifest.images()[j];
    let b = sample_point(&partner.image_id, partner.width, partner.height, rng, bias);
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGenOptions {
    pub intra: bool,
    pub cross: bool,
    /// Fraction of points forced into the bottom half of the image.
    pub bottom_bias: Option<f64>,
}

impl Default for PairGenOptions {
    fn default() -> Self {
        Self {
            intra: true,
            cross: true,
            bottom_bias: None,
        }
    }
}

impl PairGenOptions {
    pub fn intra_only() -> Self {
        Self {
            cross: false,
            ..Self::default()
        }
    }
}

/// One intra task and one cross task per image, in manifest order. Each
/// image draws from its own stream derived from `(seed, image_id)`.
pub fn generate_pair_tasks(
    manifest: &DatasetManifest,
    seed: u64,
    options: &PairGenOptions,
) -> Result<Vec<PairTask>> {
    if manifest.is_empty() {
        return Err(Error::EmptyManifest);
    }
    if options.cross && manifest.len() < 2 {
        return Err(Error::SingleImageDataset);
    }
    let mut tasks = Vec::with_capacity(2 * manifest.len());
    for entry in manifest.images() {
        let mut rng = rng::derive(seed, &entry.image_id);
        if options.intra {
            let (a, b) = sample_intra_pair_biased(
                &entry.image_id,
                entry.width,
                entry.height,
                &mut rng,
                options.bottom_bias,
            );
            tasks.push(PairTask::pending(format!("pair-{:06}", tasks.len()), a, b));
        }
        if options.cross {
            let (a, b) = sample_cross_pair_biased(manifest, &entry.image_id, &mut rng, options.bottom_bias)?;
            tasks.push(PairTask::pending(format!("pair-{:06}", tasks.len()), a, b));
        }
    }
    Ok(tasks)
}

/// Label accounting for a set of pairs.
///
/// `equivalent_labels` counts each cross pair as serving two images, the
/// convention under which one intra label plus one cross label per image
/// amounts to 3 labels for every 2 images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelAccounting {
    pub images: usize,
    pub intra: usize,
    pub cross: usize,
    pub tasks: usize,
    pub equivalent_labels: usize,
}

impl LabelAccounting {
    pub fn new(images: usize, intra: usize, cross: usize) -> Self {
        Self {
            images,
            intra,
            cross,
            tasks: intra + cross,
            equivalent_labels: intra + cross / 2,
        }
    }

    pub fn of_kinds(images: usize, kinds: impl IntoIterator<Item = PairKind>) -> Self {
        let (mut intra, mut cross) = (0, 0);
        for k in kinds {
            match k {
                PairKind::Intra => intra += 1,
                PairKind::Cross => cross += 1,
            }
        }
        Self::new(images, intra, cross)
    }

    pub fn labels_per_image(&self) -> f64 {
        if self.images == 0 {
            0.0
        } else {
            (self.intra as f64 + self.cross as f64 / 2.0) / self.images as f64
        }
    }
}

pub fn write_tasks(path: impl AsRef<Path>, tasks: &[PairTask]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for t in tasks {
        text.push_str(&serde_json::to_string(t).expect("task serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<PairTask>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e)))
        .collect()
}

pub type Tier = u8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierClass {
    pub id: u32,
    pub name: String,
    pub tier: Tier,
}

/// Semantic class id to traversability tier (0..=3, higher is easier).
/// Classes in the same tier are labeled equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierTable {
    classes: BTreeMap<u32, TierClass>,
}

#[derive(Serialize, Deserialize)]
struct TierFile {
    classes: Vec<TierClass>,
}

/// RUGD class names in label-id order (0 = void).
pub const RUGD_CLASSES: [&str; 25] = [
    "void", "dirt", "sand", "grass", "tree", "pole", "water", "sky", "vehicle",
    "container/generic-object", "asphalt", "gravel", "building", "mulch", "rock-bed",
    "log", "bicycle", "person", "fence", "bush", "sign", "rock", "bridge", "concrete",
    "picnic-table",
];

impl TierTable {
    pub fn new(classes: impl IntoIterator<Item = TierClass>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for c in classes {
            if c.tier > 3 {
                return Err(Error::Config(format!("class {} has tier {} > 3", c.id, c.tier)));
            }
            if map.insert(c.id, c.clone()).is_some() {
                return Err(Error::Config(format!("class {} listed twice", c.id)));
            }
        }
        Ok(Self { classes: map })
    }

    /// Tier 3: concrete, asphalt. Tier 2: dirt, sand, grass, gravel,
    /// mulch, rock-bed. Tier 1: water, bush. Tier 0: everything else.
    pub fn rugd_default() -> Self {
        let tier = |name: &str| match name {
            "concrete" | "asphalt" => 3,
            "dirt" | "sand" | "grass" | "gravel" | "mulch" | "rock-bed" => 2,
            "water" | "bush" => 1,
            _ => 0,
        };
        Self::new(RUGD_CLASSES.iter().enumerate().map(|(id, name)| TierClass {
            id: id as u32,
            name: name.to_string(),
            tier: tier(name),
        }))
        .expect("default table is valid")
    }

    pub fn tier(&self, class_id: u32) -> Result<Tier> {
        self.classes
            .get(&class_id)
            .map(|c| c.tier)
            .ok_or(Error::UnknownClassId(class_id))
    }

    pub fn class_by_name(&self, name: &str) -> Option<u32> {
        self.classes.values().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn classes(&self) -> impl Iterator<Item = &TierClass> {
        self.classes.values()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TierFile {
            classes: self.classes.values().cloned().collect(),
        })
        .expect("tier table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: TierFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e))?;
        Self::new(file.classes)
    }
}

/// `t = sign(tier(b) - tier(a))`.
pub fn autolabel_from_tiers(gt_a: u32, gt_b: u32, tiers: &TierTable) -> Result<Ordinal> {
    let ta = i16::from(tiers.tier(gt_a)?);
    let tb = i16::from(tiers.tier(gt_b)?);
    Ok(Ordinal::from_difference(f64::from(tb - ta)))
}

/// Labels a task from per-point class ids.
pub fn autolabel_task(
    task: &PairTask,
    class_at: impl Fn(&PointRef) -> Result<u32>,
    tiers: &TierTable,
) -> Result<PairAnnotation> {
    let t = autolabel_from_tiers(class_at(&task.a)?, class_at(&task.b)?, tiers)?;
    Ok(task.clone().into_annotation(t, LabelSource::Auto))
}

/// Auto-labels every task from the class-id maps named by the manifest's
/// `gt_path` entries. A map whose size differs from the image's native
/// size is read by nearest neighbor.
pub fn autolabel_tasks(
    manifest: &DatasetManifest,
    tasks: &[PairTask],
    tiers: &TierTable,
) -> Result<Vec<PairAnnotation>> {
    let mut maps: HashMap<String, (usize, usize, Vec<u32>)> = HashMap::new();
    let mut class_at = |p: &PointRef| -> Result<u32> {
        let entry = manifest.require(&p.image_id)?;
        if !maps.contains_key(&p.image_id) {
            let gt = entry
                .gt_path
                .as_ref()
                .ok_or_else(|| Error::Config(format!("image {} has no gt_path", p.image_id)))?;
            maps.insert(p.image_id.clone(), load_class_map(manifest.resolve(gt))?);
        }
        let (h, w, classes) = &maps[&p.image_id];
        let sx = (p.x as usize * w / entry.width as usize).min(w - 1);
        let sy = (p.y as usize * h / entry.height as usize).min(h - 1);
        Ok(classes[sy * w + sx])
    };
    tasks
        .iter()
        .map(|task| {
            let t = autolabel_from_tiers(class_at(&task.a)?, class_at(&task.b)?, tiers)?;
            Ok(task.clone().into_annotation(t, LabelSource::Auto))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{ImageEntry, Resolution};

    pub(crate) fn manifest(n: usize, w: u32, h: u32) -> DatasetManifest {
        DatasetManifest::from_entries(
            Resolution::default(),
            (0..n)
                .map(|i| ImageEntry {
                    image_id: format!("img{i}"),
                    path: format!("img{i}.png"),
                    width: w,
                    height: h,
                    gt_path: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn intra_pairs_respect_distance_at_model_resolution() {
        let mut rng = rng::seeded(11);
        for _ in 0..10_000 {
            let (a, b) = sample_intra_pair("img", 424, 240, &mut rng);
            assert!(a.distance(&b) >= 12.0);
            assert!(a.x < 424 && a.y < 240 && b.x < 424 && b.y < 240);
        }
    }

    #[test]
    fn intra_pairs_on_tiny_images() {
        let mut rng = rng::seeded(5);
        for _ in 0..10_000 {
            let (a, b) = sample_intra_pair("img", 16, 16, &mut rng);
            assert!(a.distance(&b) >= 0.8);
            assert_ne!((a.x, a.y), (b.x, b.y));
        }
    }

    #[test]
    fn same_seed_same_pair() {
        let p1 = sample_intra_pair("img", 424, 240, &mut rng::seeded(3));
        let p2 = sample_intra_pair("img", 424, 240, &mut rng::seeded(3));
        assert_eq!(p1, p2);
    }

    #[test]
    fn two_image_cross_pair_always_partners_the_other() {
        let m = manifest(2, 64, 48);
        let mut rng = rng::seeded(1);
        for _ in 0..200 {
            let (a, b) = sample_cross_pair(&m, "img0", &mut rng).unwrap();
            assert_eq!(a.image_id, "img0");
            assert_eq!(b.image_id, "img1");
        }
    }

    #[test]
    fn single_image_cross_pair_errors() {
        let m = manifest(1, 64, 48);
        assert!(matches!(
            sample_cross_pair(&m, "img0", &mut rng::seeded(1)),
            Err(Error::SingleImageDataset)
        ));
        assert!(matches!(
            generate_pair_tasks(&m, 1, &PairGenOptions::default()),
            Err(Error::SingleImageDataset)
        ));
    }

    #[test]
    fn cross_partner_distribution_is_uniform() {
        // 99 candidate partners, 10^4 draws: every count within 3 sigma of
        // the multinomial mean, and the chi-square statistic below the
        // 99.9% quantile for 98 degrees of freedom (~147.0).
        let m = manifest(100, 64, 48);
        let mut rng = rng::seeded(2024);
        let mut counts = vec![0usize; 100];
        let draws = 10_000;
        for _ in 0..draws {
            let (_, b) = sample_cross_pair(&m, "img0", &mut rng).unwrap();
            counts[m.position(&b.image_id).unwrap()] += 1;
        }
        assert_eq!(counts[0], 0);
        let p = 1.0 / 99.0;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for &c in &counts[1..] {
            assert!((c as f64 - mean).abs() <= 3.0 * sd + 1.0, "count {c} vs mean {mean}");
            chi2 += (c as f64 - mean).powi(2) / mean;
        }
        assert!(chi2 < 147.0, "chi2 = {chi2}");
    }

    #[test]
    fn bias_extremes() {
        let mut rng = rng::seeded(9);
        for _ in 0..5000 {
            assert!(sample_biased_point("i", 424, 240, &mut rng, 1.0).y >= 120);
        }
        let top = (0..20_000)
            .filter(|_| sample_biased_point("i", 424, 240, &mut rng, 0.0).y < 120)
            .count();
        assert!((top as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn bias_point_nine_gives_ninety_five_percent_bottom() {
        // P(bottom) = 0.9 + 0.1 * 0.5 = 0.95.
        let mut rng = rng::seeded(77);
        let n = 100_000;
        let bottom = (0..n)
            .filter(|_| sample_biased_point("i", 424, 240, &mut rng, 0.9).y >= 120)
            .count();
        let frac = bottom as f64 / n as f64;
        assert!((frac - 0.95).abs() <= 0.005, "fraction {frac}");
    }

    #[test]
    fn two_images_give_four_tasks() {
        let tasks = generate_pair_tasks(&manifest(2, 424, 240), 0, &PairGenOptions::default()).unwrap();
        assert_eq!(tasks.len(), 4);
        let acc = LabelAccounting::of_kinds(2, tasks.iter().map(|t| t.kind));
        assert_eq!((acc.intra, acc.cross, acc.equivalent_labels), (2, 2, 3));
    }

    #[test]
    fn single_image_intra_only() {
        let tasks = generate_pair_tasks(&manifest(1, 424, 240), 0, &PairGenOptions::intra_only()).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].kind, PairKind::Intra);
    }

    #[test]
    fn generation_is_deterministic_and_valid() {
        let m = manifest(30, 424, 240);
        let t1 = generate_pair_tasks(&m, 42, &PairGenOptions::default()).unwrap();
        let t2 = generate_pair_tasks(&m, 42, &PairGenOptions::default()).unwrap();
        assert_eq!(t1, t2);
        let t3 = generate_pair_tasks(&m, 43, &PairGenOptions::default()).unwrap();
        assert_ne!(t1, t3);
        for t in &t1 {
            t.validate(&m).unwrap();
            assert_eq!(t.status, TaskStatus::Pending);
        }
    }

    #[test]
    fn status_transitions() {
        let mut t = PairTask::pending("p", PointRef::new("a", 0, 0), PointRef::new("b", 0, 0));
        t.transition(TaskStatus::Labeled).unwrap();
        assert!(t.transition(TaskStatus::Pending).is_err());
        assert!(t.transition(TaskStatus::Skipped).is_err());
    }

    #[test]
    fn tier_labels() {
        let tiers = TierTable::rugd_default();
        let id = |n| tiers.class_by_name(n).unwrap();
        assert_eq!(autolabel_from_tiers(id("grass"), id("concrete"), &tiers).unwrap(), Ordinal::BMore);
        assert_eq!(autolabel_from_tiers(id("water"), id("bush"), &tiers).unwrap(), Ordinal::Equal);
        assert_eq!(autolabel_from_tiers(id("asphalt"), id("water"), &tiers).unwrap(), Ordinal::AMore);
        assert!(matches!(autolabel_from_tiers(99, 0, &tiers), Err(Error::UnknownClassId(99))));
        assert_eq!(tiers.tier(id("void")).unwrap(), 0);
        assert_eq!(tiers.tier(id("sky")).unwrap(), 0);
    }

    #[test]
    fn autolabel_is_antisymmetric() {
        let tiers = TierTable::rugd_default();
        for a in 0..25 {
            for b in 0..25 {
                let ab = autolabel_from_tiers(a, b, &tiers).unwrap();
                let ba = autolabel_from_tiers(b, a, &tiers).unwrap();
                assert_eq!(ab, ba.flipped());
            }
        }
    }

    #[test]
    fn tier_table_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tiers.json");
        let t = TierTable::rugd_default();
        fs::write(&p, t.to_json()).unwrap();
        assert_eq!(TierTable::load(&p).unwrap(), t);
    }

    #[test]
    fn task_file_uses_pending_status_without_label() {
        let t = PairTask::pending("pair-000000", PointRef::new("a", 1, 2), PointRef::new("b", 3, 4));
        let line = serde_json::to_string(&t).unwrap();
        assert!(line.contains("\"status\":\"pending\""));
        assert!(line.contains("\"pair_id\":\"pair-000000\""));
        assert!(!line.contains("\"t\""));
    }
}
