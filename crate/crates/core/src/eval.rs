//! Running a trained network over a manifest and scoring it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;
use crate::metrics::{
    discretize, hdr, tier_cutoffs, ConfusionMatrix, HdrReport, SegMetrics, TierCutoffs,
};
use crate::model::{Checkpoint, ParamSet, TraversabilityNet};
use crate::pairgen::{Tier, TierTable};
use crate::raster::{load_class_map, TraversabilityMap};
use crate::trainer::ImageSet;
use crate::types::PairAnnotation;

/// Which parameter set of a checkpoint to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weights {
    #[default]
    Teacher,
    Student,
}

impl std::str::FromStr for Weights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher" => Ok(Weights::Teacher),
            "student" => Ok(Weights::Student),
            _ => Err(Error::Config(format!("unknown weights {s:?} (teacher, student)"))),
        }
    }
}

/// A network with fixed parameters and a per-image output cache.
pub struct Predictor {
    net: TraversabilityNet,
    params: ParamSet,
    cache: HashMap<String, TraversabilityMap>,
}

impl Predictor {
    pub fn new(net: TraversabilityNet, params: ParamSet) -> Result<Self> {
        net.check_params(&params)?;
        Ok(Self {
            net,
            params,
            cache: HashMap::new(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint, weights: Weights) -> Result<Self> {
        let net = TraversabilityNet::new(ckpt.meta.model.clone())?;
        let params = match weights {
            Weights::Teacher => ckpt.teacher.clone(),
            Weights::Student => ckpt.student.clone(),
        };
        Self::new(net, params)
    }

    pub fn net(&self) -> &TraversabilityNet {
        &self.net
    }

    pub fn predict(&mut self, image_id: &str, images: &ImageSet) -> Result<&TraversabilityMap> {
        if !self.cache.contains_key(image_id) {
            let map = self.net.forward(&self.params, images.get(image_id)?)?;
            self.cache.insert(image_id.to_string(), map);
        }
        Ok(&self.cache[image_id])
    }

    /// Prediction pairs `(p_a, p_b)` read at the annotated native pixels.
    pub fn predict_pairs(
        &mut self,
        manifest: &DatasetManifest,
        images: &ImageSet,
        annotations: &[PairAnnotation],
    ) -> Result<Vec<(f64, f64)>> {
        annotations
            .iter()
            .map(|ann| {
                let mut read = |p: &crate::types::PointRef| -> Result<f64> {
                    let e = manifest.require(&p.image_id)?;
                    let (w, h) = (e.width, e.height);
                    Ok(self.predict(&p.image_id, images)?.sample_native(p.x, p.y, w, h))
                };
                Ok((read(&ann.a)?, read(&ann.b)?))
            })
            .collect()
    }
}

pub fn evaluate_hdr(
    predictor: &mut Predictor,
    manifest: &DatasetManifest,
    images: &ImageSet,
    annotations: &[PairAnnotation],
    taus: &[f64],
) -> Result<HdrReport> {
    let preds = predictor.predict_pairs(manifest, images, annotations)?;
    let labels: Vec<_> = annotations.iter().map(|a| a.t).collect();
    hdr(&preds, &labels, taus)
}

/// Per-pixel ground-truth tiers of one image at model resolution, read
/// from its class-id map by nearest neighbor.
pub fn gt_tiers(
    manifest: &DatasetManifest,
    image_id: &str,
    tiers: &TierTable,
) -> Result<Vec<Tier>> {
    let entry = manifest.require(image_id)?;
    let gt = entry
        .gt_path
        .as_ref()
        .ok_or_else(|| Error::Config(format!("image {image_id} has no gt_path")))?;
    let (h, w, classes) = load_class_map(manifest.resolve(gt))?;
    let res = manifest.resolution();
    let mut out = Vec::with_capacity(res.pixels());
    for y in 0..res.height {
        let sy = ((y * h) / res.height).min(h - 1);
        for x in 0..res.width {
            let sx = ((x * w) / res.width).min(w - 1);
            out.push(tiers.tier(classes[sy * w + sx])?);
        }
    }
    Ok(out)
}

/// Tier cutoffs from the model's scores on pixels of known tier.
pub fn calibrate_cutoffs(
    predictor: &mut Predictor,
    manifest: &DatasetManifest,
    images: &ImageSet,
    tiers: &TierTable,
) -> Result<TierCutoffs> {
    let mut scores: BTreeMap<Tier, Vec<f64>> = BTreeMap::new();
    for entry in manifest.images() {
        let gt = gt_tiers(manifest, &entry.image_id, tiers)?;
        let map = predictor.predict(&entry.image_id, images)?;
        for (&t, &s) in gt.iter().zip(map.values()) {
            scores.entry(t).or_default().push(s);
        }
    }
    tier_cutoffs(&scores)
}

/// Segmentation scores of discretized predictions over a whole manifest.
pub fn evaluate_segmentation(
    predictor: &mut Predictor,
    manifest: &DatasetManifest,
    images: &ImageSet,
    tiers: &TierTable,
    cutoffs: &TierCutoffs,
) -> Result<SegMetrics> {
    let mut cm = ConfusionMatrix::default();
    for entry in manifest.images() {
        let gt = gt_tiers(manifest, &entry.image_id, tiers)?;
        let pred = discretize(predictor.predict(&entry.image_id, images)?, cutoffs);
        cm.add(&pred, &gt)?;
    }
    cm.metrics()
}

/// Fraction of values inside `[lo, hi]`.
pub fn interior_fraction<'a>(maps: impl IntoIterator<Item = &'a TraversabilityMap>, lo: f64, hi: f64) -> f64 {
    let (mut inside, mut total) = (0usize, 0usize);
    for m in maps {
        total += m.values().len();
        inside += m.values().iter().filter(|v| (lo..=hi).contains(*v)).count();
    }
    if total == 0 {
        0.0
    } else {
        inside as f64 / total as f64
    }
}
