//! Mean-teacher training.
//!
//! Each step draws annotations from an inequality-oversampled stream until
//! the batch covers `batch_size` images (a cross pair brings both of its
//! images). Every image gets one crop/flip shared by its student and
//! teacher views and independent color jitter per view. The student is
//! trained on the pairwise loss read bilinearly at the transformed points
//! plus `lambda` times the pixel MSE to the teacher's output; the teacher
//! then moves toward the student by EMA and never sees a gradient.

mod augment;
mod images;
mod optim;
mod sampling;

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use augment::{augment_pair, AugmentConfig, AugmentedPair, ColorJitter, GeometricTransform};
pub use images::ImageSet;
pub use optim::{Adam, AdamConfig};
pub use sampling::{oversample_stream, select_training_annotations, OversampleStream};

use crate::error::{Error, Result};
use crate::losses::{consistency_mse, LossConfig, PairLoss};
use crate::manifest::DatasetManifest;
use crate::model::{ema_update_in_place, Checkpoint, CheckpointMeta, ModelConfig, ParamSet, TraversabilityNet, HEAD_PREFIX};
use crate::raster::{bilinear_taps, native_to_map, sample_bilinear};
use crate::rng;
use crate::types::{PairAnnotation, PointRef};
use sampling::OversampleIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: PairLoss,
    /// Margin, snow clamp and consistency weight `lambda`.
    pub loss_config: LossConfig,
    /// Teacher EMA decay.
    pub alpha: f64,
    pub epochs: usize,
    /// Images per step.
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: AdamConfig,
    pub augment: AugmentConfig,
    /// Desired long-run fraction of inequality labels per batch.
    pub oversample_target: f64,
    pub encoder_widths: Vec<usize>,
    pub skip_connections: bool,
    /// Drop cross-image pairs.
    pub intra_only: bool,
    /// Trim the mixed label set to the intra-only budget.
    pub equal_budget: bool,
    /// Stop after this many steps regardless of `epochs`.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: PairLoss::Rizz,
            loss_config: LossConfig::default(),
            alpha: 0.99,
            epochs: 10,
            batch_size: 1,
            seed: 0,
            optimizer: AdamConfig::default(),
            augment: AugmentConfig::default(),
            oversample_target: 0.5,
            encoder_widths: vec![8, 16, 16, 32],
            skip_connections: true,
            intra_only: false,
            equal_budget: false,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss_config.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.oversample_target > 0.0 && self.oversample_target < 1.0) {
            return Err(Error::Config(format!(
                "oversample target must lie in (0, 1), got {}",
                self.oversample_target
            )));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        let (lo, hi) = self.augment.crop_scale;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("crop scale range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1")));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub acc_loss: f64,
    pub cons_loss: f64,
    pub total: f64,
    pub lr: f64,
}

pub fn write_log(path: impl AsRef<Path>, log: &[LogRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in log {
        text.push_str(&serde_json::to_string(r).expect("log record serializes"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Losses and student gradient for one batch.
#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub acc_loss: f64,
    pub cons_loss: f64,
    pub total: f64,
    /// Pairs whose points both survived the crop.
    pub kept_pairs: usize,
    pub dropped_pairs: usize,
    pub images: usize,
    pub grads: ParamSet,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<LogRecord>,
}

pub struct Trainer<'a> {
    config: TrainConfig,
    net: TraversabilityNet,
    manifest: &'a DatasetManifest,
    images: &'a ImageSet,
    annotations: Vec<PairAnnotation>,
    stream: OversampleIndex,
    student: ParamSet,
    teacher: ParamSet,
    adam: Adam,
    step: usize,
    distinct_images: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: TrainConfig,
        manifest: &'a DatasetManifest,
        images: &'a ImageSet,
        annotations: &[PairAnnotation],
    ) -> Result<Self> {
        Self::with_init(config, manifest, images, annotations, None)
    }

    /// Like [`Trainer::new`], optionally copying every non-head layer from
    /// pretrained parameters.
    pub fn with_init(
        config: TrainConfig,
        manifest: &'a DatasetManifest,
        images: &'a ImageSet,
        annotations: &[PairAnnotation],
        pretrained: Option<&ParamSet>,
    ) -> Result<Self> {
        config.validate()?;
        let mut select_rng = rng::derive(config.seed, "select");
        let annotations =
            select_training_annotations(annotations, config.intra_only, config.equal_budget, &mut select_rng);
        if annotations.is_empty() {
            return Err(Error::EmptyAnnotationSet);
        }
        for a in &annotations {
            a.validate(manifest)?;
            for id in a.image_ids() {
                images.get(id)?;
            }
        }
        let net = TraversabilityNet::new(ModelConfig {
            encoder_widths: config.encoder_widths.clone(),
            skip_connections: config.skip_connections,
            input_resolution: manifest.resolution(),
        })?;
        let mut student = net.init_params(&mut rng::derive(config.seed, "init"));
        if let Some(p) = pretrained {
            student.import_except(p, HEAD_PREFIX)?;
        }
        let teacher = student.clone();
        let stream = OversampleIndex::new(&annotations, rng::derive(config.seed, "stream"), config.oversample_target)?;
        let distinct_images = annotations
            .iter()
            .flat_map(|a| a.image_ids())
            .collect::<HashSet<_>>()
            .len();
        Ok(Self {
            adam: Adam::new(config.optimizer, &student),
            config,
            net,
            manifest,
            images,
            annotations,
            stream,
            student,
            teacher,
            step: 0,
            distinct_images,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn net(&self) -> &TraversabilityNet {
        &self.net
    }

    pub fn annotations(&self) -> &[PairAnnotation] {
        &self.annotations
    }

    pub fn student(&self) -> &ParamSet {
        &self.student
    }

    pub fn student_mut(&mut self) -> &mut ParamSet {
        &mut self.student
    }

    pub fn teacher(&self) -> &ParamSet {
        &self.teacher
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.distinct_images.div_ceil(self.config.batch_size)
    }

    pub fn total_steps(&self) -> usize {
        let n = self.config.epochs * self.steps_per_epoch();
        self.config.max_steps.map_or(n, |m| m.min(n))
    }

    /// Draws annotation indices until the batch covers `batch_size`
    /// distinct images (or every image in the training set).
    pub fn next_batch(&mut self) -> Vec<usize> {
        let want = self.config.batch_size.min(self.distinct_images);
        let mut seen: Vec<&str> = Vec::new();
        let mut batch = Vec::new();
        while seen.len() < want {
            let i = self.stream.next_index();
            for id in self.annotations[i].image_ids() {
                if !seen.contains(&id) {
                    seen.push(id);
                }
            }
            batch.push(i);
        }
        batch
    }

    fn map_point(&self, p: &PointRef) -> Result<(f64, f64)> {
        let e = self.manifest.require(&p.image_id)?;
        Ok(native_to_map(p.x, p.y, e.width, e.height, self.manifest.resolution()))
    }

    /// Loss and student gradient on the given annotations, with
    /// augmentation drawn from `rng`.
    pub fn batch_outcome(&self, batch: &[usize], rng: &mut rng::Rng) -> Result<BatchOutcome> {
        let res = self.manifest.resolution();
        let (h, w) = (res.height, res.width);
        let hw = h * w;
        let lambda = self.config.loss_config.consistency_weight;

        let mut ids: Vec<&str> = Vec::new();
        for &i in batch {
            for id in self.annotations[i].image_ids() {
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
        }
        let slot = |id: &str| ids.iter().position(|x| *x == id).expect("image in batch");

        let mut transforms = Vec::with_capacity(ids.len());
        let mut caches = Vec::with_capacity(ids.len());
        let mut teacher_out = Vec::with_capacity(ids.len());
        for id in &ids {
            let aug = augment_pair(self.images.get(id)?, &[], rng, &self.config.augment);
            caches.push(self.net.forward_cached(&self.student, &aug.student_view)?);
            teacher_out.push(self.net.forward(&self.teacher, &aug.teacher_view)?);
            transforms.push(aug.transform);
        }

        let mut grad_maps = vec![vec![0.0; hw]; ids.len()];
        let mut reads = Vec::new();
        for &i in batch {
            let ann = &self.annotations[i];
            let (sa, sb) = (slot(&ann.a.image_id), slot(&ann.b.image_id));
            let (ax, ay) = self.map_point(&ann.a)?;
            let (bx, by) = self.map_point(&ann.b)?;
            if let (Some(pa), Some(pb)) = (transforms[sa].map_point(ax, ay), transforms[sb].map_point(bx, by)) {
                reads.push((i, sa, pa, sb, pb));
            }
        }
        let kept = reads.len();
        let mut acc_sum = 0.0;
        for &(i, sa, (xa, ya), sb, (xb, yb)) in &reads {
            let p_a = sample_bilinear(caches[sa].output(), h, w, xa, ya);
            let p_b = sample_bilinear(caches[sb].output(), h, w, xb, yb);
            let g = self
                .config
                .loss
                .value_and_grad(p_a, p_b, self.annotations[i].t, &self.config.loss_config);
            acc_sum += g.value;
            let scale = 1.0 / kept as f64;
            for (idx, wt) in bilinear_taps(h, w, xa, ya) {
                grad_maps[sa][idx] += scale * g.d_pa * wt;
            }
            for (idx, wt) in bilinear_taps(h, w, xb, yb) {
                grad_maps[sb][idx] += scale * g.d_pb * wt;
            }
        }
        let acc_loss = if kept > 0 { acc_sum / kept as f64 } else { 0.0 };

        let n_img = ids.len() as f64;
        let mut cons_loss = 0.0;
        for (k, cache) in caches.iter().enumerate() {
            let s = cache.output();
            let t = teacher_out[k].values();
            cons_loss += consistency_mse(s, t) / n_img;
            if lambda > 0.0 {
                let c = 2.0 * lambda / (hw as f64 * n_img);
                for (g, (sv, tv)) in grad_maps[k].iter_mut().zip(s.iter().zip(t)) {
                    *g += c * (sv - tv);
                }
            }
        }

        let mut grads = self.student.zeros_like();
        for (cache, gm) in caches.iter().zip(&grad_maps) {
            self.net.backward(&self.student, cache, gm, &mut grads)?;
        }
        Ok(BatchOutcome {
            acc_loss,
            cons_loss,
            total: acc_loss + lambda * cons_loss,
            kept_pairs: kept,
            dropped_pairs: batch.len() - kept,
            images: ids.len(),
            grads,
        })
    }

    /// One optimizer step followed by the teacher EMA update.
    pub fn step(&mut self) -> Result<LogRecord> {
        let batch = self.next_batch();
        let mut step_rng = rng::derive(self.config.seed, &format!("step-{}", self.step));
        let out = self.batch_outcome(&batch, &mut step_rng)?;
        if !(out.acc_loss.is_finite() && out.cons_loss.is_finite() && out.total.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step: self.step,
                acc_loss: out.acc_loss,
                cons_loss: out.cons_loss,
            });
        }
        self.adam.step(&mut self.student, &out.grads);
        ema_update_in_place(&mut self.teacher, &self.student, self.config.alpha)?;
        let rec = LogRecord {
            step: self.step,
            acc_loss: out.acc_loss,
            cons_loss: out.cons_loss,
            total: out.total,
            lr: self.config.optimizer.lr,
        };
        self.step += 1;
        Ok(rec)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            meta: CheckpointMeta {
                model: self.net.config().clone(),
                step: self.step,
                alpha: self.config.alpha,
                loss: self.config.loss,
                margin: self.config.loss_config.margin,
                consistency_weight: self.config.loss_config.consistency_weight,
                seed: self.config.seed,
            },
            student: self.student.clone(),
            teacher: self.teacher.clone(),
        }
    }

    /// Runs the remaining steps, reporting each log record.
    pub fn run(mut self, mut on_step: impl FnMut(&LogRecord)) -> Result<TrainOutcome> {
        let total = self.total_steps();
        let mut log = Vec::with_capacity(total);
        while self.step < total {
            let rec = self.step()?;
            on_step(&rec);
            log.push(rec);
        }
        Ok(TrainOutcome {
            checkpoint: self.checkpoint(),
            log,
        })
    }
}

pub fn train(
    config: TrainConfig,
    manifest: &DatasetManifest,
    images: &ImageSet,
    annotations: &[PairAnnotation],
) -> Result<TrainOutcome> {
    Trainer::new(config, manifest, images, annotations)?.run(|_| {})
}
