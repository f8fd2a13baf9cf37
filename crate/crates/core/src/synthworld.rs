//! Procedural scenes with dense ground-truth traversability and a label
//! oracle.
//!
//! A scene is a Voronoi partition of the image into convex polygonal
//! regions. Each region takes one of a few discrete score levels from its
//! scene family's range, and its color is an interpolation along the
//! family's palette by that level, with a per-region offset, a faint stripe
//! pattern and per-pixel noise. Families A and B use disjoint palettes, so
//! a network can tell them apart but has to learn from cross-image labels
//! how their score scales relate.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{DatasetManifest, ImageEntry, Resolution};
use crate::pairgen::{generate_pair_tasks, write_tasks, PairGenOptions, PairTask};
use crate::raster::{RgbImage, TraversabilityMap};
use crate::rng::{self, Rng};
use crate::store::write_annotations;
use crate::types::{LabelSource, Ordinal, PairAnnotation, PointRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SceneFamily {
    A,
    B,
}

impl SceneFamily {
    /// Palette endpoints (lowest level, highest level).
    fn palette(self) -> ([f64; 3], [f64; 3]) {
        match self {
            SceneFamily::A => ([0.45, 0.20, 0.10], [0.95, 0.85, 0.30]),
            SceneFamily::B => ([0.10, 0.15, 0.45], [0.35, 0.85, 0.85]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub resolution: Resolution,
    pub min_regions: usize,
    pub max_regions: usize,
    /// Number of evenly spaced score levels inside a family's range.
    pub levels: usize,
    /// Oracle equality tolerance.
    pub epsilon: f64,
    /// Family A scores in [0.5, 1], family B in [0, 0.5]; otherwise both
    /// families span [0, 1].
    pub stress_calibration: bool,
    pub pixel_noise: f64,
    /// Prefix of generated image ids.
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            resolution: Resolution::new(48, 64),
            min_regions: 3,
            max_regions: 8,
            levels: 3,
            epsilon: 0.1,
            stress_calibration: false,
            pixel_noise: 0.04,
            id_prefix: "synth".into(),
        }
    }
}

impl SynthConfig {
    pub fn stress() -> Self {
        Self {
            stress_calibration: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.resolution;
        if r.height < 16 || r.width < 16 {
            return Err(Error::Config(format!("synthetic resolution {r} below 16 px")));
        }
        if self.min_regions == 0 || self.min_regions > self.max_regions {
            return Err(Error::Config("region count range must satisfy 1 <= min <= max".into()));
        }
        if self.levels == 0 {
            return Err(Error::Config("at least one score level is required".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.pixel_noise >= 0.0) {
            return Err(Error::Config("epsilon and noise must be non-negative".into()));
        }
        Ok(())
    }

    pub fn score_range(&self, family: SceneFamily) -> (f64, f64) {
        match (self.stress_calibration, family) {
            (false, _) => (0.0, 1.0),
            (true, SceneFamily::A) => (0.5, 1.0),
            (true, SceneFamily::B) => (0.0, 0.5),
        }
    }

    /// Level centers `lo + (hi - lo) * (i + 0.5) / levels`.
    pub fn score_levels(&self, family: SceneFamily) -> Vec<f64> {
        let (lo, hi) = self.score_range(family);
        (0..self.levels)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / self.levels as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: RgbImage,
    pub gt_field: TraversabilityMap,
    /// Row-major region id per pixel.
    pub regions: Vec<u16>,
    pub region_scores: Vec<f64>,
    pub family: SceneFamily,
}

impl SyntheticScene {
    pub fn gt_at(&self, x: u32, y: u32) -> f64 {
        self.gt_field.get(x as usize, y as usize)
    }
}

/// Scene with a family drawn from the seed.
pub fn generate_scene(seed: u64, config: &SynthConfig) -> Result<SyntheticScene> {
    let family = if rng::derive(seed, "family").gen_bool(0.5) {
        SceneFamily::A
    } else {
        SceneFamily::B
    };
    generate_scene_in(seed, family, config)
}

pub fn generate_scene_in(seed: u64, family: SceneFamily, config: &SynthConfig) -> Result<SyntheticScene> {
    config.validate()?;
    let (h, w) = (config.resolution.height, config.resolution.width);
    let mut layout = rng::derive(seed, "layout");
    let n_regions = layout.gen_range(config.min_regions..=config.max_regions);
    let sites: Vec<(f64, f64)> = (0..n_regions)
        .map(|_| (layout.gen_range(0.0..w as f64), layout.gen_range(0.0..h as f64)))
        .collect();
    let levels = config.score_levels(family);
    let (lo, hi) = config.score_range(family);
    let region_scores: Vec<f64> = (0..n_regions).map(|_| levels[layout.gen_range(0..levels.len())]).collect();

    let mut regions = vec![0u16; h * w];
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let nearest = sites
                .iter()
                .enumerate()
                .map(|(i, &(sx, sy))| (i, (sx - px).powi(2) + (sy - py).powi(2)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map_or(0, |(i, _)| i);
            regions[y * w + x] = nearest as u16;
        }
    }

    let textures: Vec<RegionTexture> = (0..n_regions)
        .map(|r| {
            let f = if hi > lo { (region_scores[r] - lo) / (hi - lo) } else { 0.5 };
            RegionTexture::new(&mut rng::derive(seed, &format!("region-{r}")), family, f)
        })
        .collect();

    let mut noise_rng = rng::derive(seed, "noise");
    let noise = Normal::new(0.0, config.pixel_noise.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut image = RgbImage::zeros(h, w);
    let mut gt = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let r = regions[y * w + x] as usize;
            let base = textures[r].color(x as f64, y as f64);
            for (c, b) in base.iter().enumerate() {
                let n = if config.pixel_noise > 0.0 { noise.sample(&mut noise_rng) } else { 0.0 };
                image.set(c, y, x, (b + n).clamp(0.0, 1.0));
            }
            gt.push(region_scores[r]);
        }
    }
    Ok(SyntheticScene {
        image,
        gt_field: TraversabilityMap::new(h, w, gt)?,
        regions,
        region_scores,
        family,
    })
}

struct RegionTexture {
    color: [f64; 3],
    stripe_amp: f64,
    freq: (f64, f64),
    phase: f64,
}

impl RegionTexture {
    fn new(rng: &mut Rng, family: SceneFamily, f: f64) -> Self {
        let (low, high) = family.palette();
        let mut color = [0.0; 3];
        for c in 0..3 {
            color[c] = low[c] + (high[c] - low[c]) * f + rng.gen_range(-0.04..0.04);
        }
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let k = rng.gen_range(0.4..1.2);
        Self {
            color,
            stripe_amp: rng.gen_range(0.0..0.05),
            freq: (k * angle.cos(), k * angle.sin()),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
        }
    }

    fn color(&self, x: f64, y: f64) -> [f64; 3] {
        let s = self.stripe_amp * (self.freq.0 * x + self.freq.1 * y + self.phase).sin();
        self.color.map(|c| c + s)
    }
}

/// `t = 0` if `|g_b - g_a| <= eps`, else the sign of `g_b - g_a`.
pub fn oracle_ordinal(g_a: f64, g_b: f64, eps: f64) -> Ordinal {
    let d = g_b - g_a;
    if d.abs() <= eps {
        Ordinal::Equal
    } else {
        Ordinal::from_difference(d)
    }
}

pub fn oracle_label(
    gt_a: &TraversabilityMap,
    a: (u32, u32),
    gt_b: &TraversabilityMap,
    b: (u32, u32),
    eps: f64,
) -> Ordinal {
    oracle_ordinal(gt_a.get(a.0 as usize, a.1 as usize), gt_b.get(b.0 as usize, b.1 as usize), eps)
}

/// A generated dataset held in memory.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub manifest: DatasetManifest,
    pub scenes: Vec<SyntheticScene>,
    pub tasks: Vec<PairTask>,
    pub annotations: Vec<PairAnnotation>,
}

impl SynthDataset {
    pub fn scene(&self, image_id: &str) -> Option<&SyntheticScene> {
        self.manifest.position(image_id).map(|i| &self.scenes[i])
    }

    pub fn image_set(&self) -> crate::trainer::ImageSet {
        crate::trainer::ImageSet::from_pairs(
            self.manifest
                .images()
                .iter()
                .zip(&self.scenes)
                .map(|(e, s)| (e.image_id.clone(), s.image.clone())),
        )
    }

    pub fn gt_at(&self, p: &PointRef) -> Result<f64> {
        let s = self.scene(&p.image_id).ok_or_else(|| Error::UnknownImageId(p.image_id.clone()))?;
        Ok(s.gt_at(p.x, p.y))
    }

    /// Oracle label for any pair of points in this dataset.
    pub fn label(&self, a: &PointRef, b: &PointRef) -> Result<Ordinal> {
        Ok(oracle_ordinal(self.gt_at(a)?, self.gt_at(b)?, self.config.epsilon))
    }

    /// The dataset restricted to `ids` (in manifest order), with pair tasks
    /// regenerated under the standard protocol and relabeled by the oracle.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>, pair_seed: u64) -> Result<SynthDataset> {
        let manifest = self.manifest.subset(ids);
        let scenes = manifest
            .images()
            .iter()
            .map(|e| self.scene(&e.image_id).cloned().ok_or_else(|| Error::UnknownImageId(e.image_id.clone())))
            .collect::<Result<Vec<_>>>()?;
        let mut ds = SynthDataset {
            config: self.config.clone(),
            manifest,
            scenes,
            tasks: Vec::new(),
            annotations: Vec::new(),
        };
        ds.relabel(pair_seed)?;
        Ok(ds)
    }

    fn relabel(&mut self, pair_seed: u64) -> Result<()> {
        let tasks = generate_pair_tasks(&self.manifest, pair_seed, &PairGenOptions::default())?;
        self.annotations = tasks
            .iter()
            .map(|task| Ok(task.clone().into_annotation(self.label(&task.a, &task.b)?, LabelSource::Synthetic)))
            .collect::<Result<_>>()?;
        self.tasks = tasks;
        Ok(())
    }

    /// Writes `manifest.jsonl`, `tasks.jsonl`, `annotations.jsonl`, RGB
    /// images under `images/` and 16-bit ground truth under `gt/`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<SynthPaths> {
        let dir = dir.as_ref();
        for sub in ["images", "gt"] {
            let d = dir.join(sub);
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        for (entry, scene) in self.manifest.images().iter().zip(&self.scenes) {
            scene.image.save_png(dir.join(&entry.path))?;
            if let Some(gt) = &entry.gt_path {
                scene.gt_field.save_png16(dir.join(gt))?;
            }
        }
        let paths = SynthPaths::in_dir(dir);
        self.manifest.save(&paths.manifest)?;
        write_tasks(&paths.tasks, &self.tasks)?;
        write_annotations(&paths.annotations, &self.annotations)?;
        Ok(paths)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthPaths {
    pub manifest: PathBuf,
    pub tasks: PathBuf,
    pub annotations: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            manifest: dir.join("manifest.jsonl"),
            tasks: dir.join("tasks.jsonl"),
            annotations: dir.join("annotations.jsonl"),
        }
    }
}

/// `n` scenes with alternating families, pair tasks from the standard
/// protocol, and oracle labels tagged `synthetic`.
pub fn build_synth_dataset(seed: u64, n_images: usize, config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    if n_images < 2 {
        return Err(Error::SingleImageDataset);
    }
    let res = config.resolution;
    let mut manifest = DatasetManifest::new(res);
    let mut scenes = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let id = format!("{}-{i:05}", config.id_prefix);
        let family = if i % 2 == 0 { SceneFamily::A } else { SceneFamily::B };
        scenes.push(generate_scene_in(rng::derive_seed(seed, &id), family, config)?);
        manifest.push(ImageEntry {
            path: format!("images/{id}.png"),
            gt_path: Some(format!("gt/{id}.png")),
            image_id: id,
            width: res.width as u32,
            height: res.height as u32,
        })?;
    }
    let mut ds = SynthDataset {
        config: config.clone(),
        manifest,
        scenes,
        tasks: Vec::new(),
        annotations: Vec::new(),
    };
    ds.relabel(rng::derive_seed(seed, "pairs"))?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let cfg = SynthConfig::default();
        assert_eq!(generate_scene(3, &cfg).unwrap(), generate_scene(3, &cfg).unwrap());
        assert_ne!(generate_scene(3, &cfg).unwrap().image, generate_scene(4, &cfg).unwrap().image);
    }

    #[test]
    fn single_region_is_constant() {
        let cfg = SynthConfig {
            min_regions: 1,
            max_regions: 1,
            ..SynthConfig::default()
        };
        let s = generate_scene(9, &cfg).unwrap();
        let v = s.gt_field.values();
        assert!(v.iter().all(|&g| g == v[0]));
    }

    #[test]
    fn gt_is_constant_per_region() {
        let s = generate_scene(11, &SynthConfig::default()).unwrap();
        for (r, &g) in s.regions.iter().zip(s.gt_field.values()) {
            assert_eq!(g, s.region_scores[*r as usize]);
        }
        let n = s.region_scores.len();
        assert!((3..=8).contains(&n));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_ordinal(0.4, 0.4, 0.1), Ordinal::Equal);
        assert_eq!(oracle_ordinal(0.2, 0.9, 0.1), Ordinal::BMore);
        assert_eq!(oracle_ordinal(0.50, 0.55, 0.1), Ordinal::Equal);
        assert_eq!(oracle_ordinal(0.9, 0.2, 0.1), Ordinal::AMore);
    }

    #[test]
    fn two_images_give_two_intra_two_cross() {
        let ds = build_synth_dataset(1, 2, &SynthConfig::default()).unwrap();
        let intra = ds.annotations.iter().filter(|a| a.is_intra()).count();
        assert_eq!((intra, ds.annotations.len() - intra), (2, 2));
        for a in &ds.annotations {
            assert_eq!(a.source, LabelSource::Synthetic);
            a.validate(&ds.manifest).unwrap();
        }
    }

    #[test]
    fn stress_cross_pairs_favor_family_a() {
        let ds = build_synth_dataset(5, 40, &SynthConfig::stress()).unwrap();
        let mut checked = 0;
        for ann in ds.annotations.iter().filter(|a| !a.is_intra()) {
            let fa = ds.scene(&ann.a.image_id).unwrap().family;
            let fb = ds.scene(&ann.b.image_id).unwrap().family;
            let gap = (ds.gt_at(&ann.b).unwrap() - ds.gt_at(&ann.a).unwrap()).abs();
            if fa != fb && gap > ds.config.epsilon {
                let expect = if fa == SceneFamily::A { Ordinal::AMore } else { Ordinal::BMore };
                assert_eq!(ann.t, expect);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn gt_distribution_matches_range() {
        let cfg = SynthConfig::default();
        let levels = cfg.score_levels(SceneFamily::A);
        let mean_level = levels.iter().sum::<f64>() / levels.len() as f64;
        let var_level = levels.iter().map(|l| (l - mean_level).powi(2)).sum::<f64>() / levels.len() as f64;
        let n = 1000;
        let mut sum = 0.0;
        for s in 0..n {
            let scene = generate_scene(s, &cfg).unwrap();
            // one region score per scene keeps the draws independent
            let g = scene.region_scores[0];
            assert!((0.0..=1.0).contains(&g));
            sum += g;
        }
        let mean = sum / n as f64;
        let sigma = (var_level / n as f64).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * sigma, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SynthConfig::default();
        cfg.min_regions = 0;
        assert!(cfg.validate().is_err());
        cfg = SynthConfig::default();
        cfg.resolution = Resolution::new(8, 64);
        assert!(cfg.validate().is_err());
        assert!(matches!(build_synth_dataset(0, 1, &SynthConfig::default()), Err(Error::SingleImageDataset)));
    }
}
