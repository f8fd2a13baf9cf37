//! Synthetic experiments: the cross-image pair ablation and the label
//! budget sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_hdr, Predictor, Weights};
use crate::metrics::HdrRow;
use crate::rng;
use crate::synthworld::{build_synth_dataset, SynthConfig, SynthDataset};
use crate::trainer::{train, TrainConfig};
use crate::types::PairAnnotation;

/// Training settings used by the synthetic studies: the defaults with a
/// larger learning rate, which converges within ten epochs on the tiny
/// scenes.
pub fn desk_train_config(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    cfg.optimizer.lr = 3e-3;
    cfg
}

/// Trains on `train_set` and scores the chosen weights on `eval_pairs`.
pub fn train_and_score(
    config: TrainConfig,
    train_set: &SynthDataset,
    eval_set: &SynthDataset,
    eval_pairs: &[PairAnnotation],
    tau: f64,
    weights: Weights,
) -> Result<HdrRow> {
    let images = train_set.image_set();
    let outcome = train(config, &train_set.manifest, &images, &train_set.annotations)?;
    let mut predictor = Predictor::from_checkpoint(&outcome.checkpoint, weights)?;
    let report = evaluate_hdr(&mut predictor, &eval_set.manifest, &eval_set.image_set(), eval_pairs, &[tau])?;
    Ok(report.rows.into_iter().next().expect("one threshold"))
}

fn heldout_config(synth: &SynthConfig) -> SynthConfig {
    SynthConfig {
        id_prefix: format!("{}-heldout", synth.id_prefix),
        ..synth.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub n_train: usize,
    pub n_heldout: usize,
    pub seeds: Vec<u64>,
    pub tau: f64,
    pub synth: SynthConfig,
    pub epochs: usize,
    pub weights: Weights,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_heldout: 100,
            seeds: vec![0, 1, 2],
            tau: 0.25,
            synth: SynthConfig::stress(),
            epochs: 10,
            weights: Weights::Teacher,
        }
    }
}

/// Inequality disagreement on held-out cross-image pairs for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub intra_cross: HdrRow,
    pub intra_only: HdrRow,
}

impl AblationRow {
    /// Mixed training strictly beats intra-only on cross-pair `HDR^neq`.
    pub fn cross_helps(&self) -> bool {
        match (self.intra_cross.hdr_neq, self.intra_only.hdr_neq) {
            (Some(m), Some(i)) => m < i,
            _ => false,
        }
    }
}

/// Equal-budget comparison of intra+cross training against intra-only
/// training, scored on held-out cross-image pairs.
pub fn cross_ablation(config: &AblationConfig, mut on_row: impl FnMut(&AblationRow)) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let data_seed = rng::derive_seed(seed, "ablation-train");
        let train_set = build_synth_dataset(data_seed, config.n_train, &config.synth)?;
        let held = build_synth_dataset(
            rng::derive_seed(seed, "ablation-heldout"),
            config.n_heldout,
            &heldout_config(&config.synth),
        )?;
        let cross_pairs: Vec<_> = held.annotations.iter().filter(|a| !a.is_intra()).cloned().collect();
        let run = |intra_only: bool| {
            let cfg = TrainConfig {
                epochs: config.epochs,
                intra_only,
                equal_budget: true,
                ..desk_train_config(seed)
            };
            train_and_score(cfg, &train_set, &held, &cross_pairs, config.tau, config.weights)
        };
        let row = AblationRow {
            seed,
            intra_cross: run(false)?,
            intra_only: run(true)?,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n_train: usize,
    pub n_heldout: usize,
    pub tau: f64,
    pub synth: SynthConfig,
    pub epochs: usize,
    pub weights: Weights,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.05, 0.1, 0.25, 0.5, 1.0],
            seeds: vec![0, 1, 2],
            n_train: 200,
            n_heldout: 100,
            tau: 0.25,
            synth: SynthConfig::default(),
            epochs: 10,
            weights: Weights::Teacher,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub seed: u64,
    pub n_images: usize,
    pub n_labels: usize,
    pub result: HdrRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub fraction: f64,
    pub median_hdr: f64,
}

/// Median HDR per fraction, in the order the fractions were given.
pub fn sweep_medians(fractions: &[f64], points: &[SweepPoint]) -> Vec<SweepSummary> {
    fractions
        .iter()
        .map(|&f| {
            let mut v: Vec<f64> = points
                .iter()
                .filter(|p| p.fraction == f)
                .map(|p| p.result.hdr)
                .collect();
            v.sort_by(f64::total_cmp);
            let median = match v.len() {
                0 => f64::NAN,
                n if n % 2 == 1 => v[n / 2],
                n => (v[n / 2 - 1] + v[n / 2]) / 2.0,
            };
            SweepSummary {
                fraction: f,
                median_hdr: median,
            }
        })
        .collect()
}

pub fn is_non_increasing(summary: &[SweepSummary]) -> bool {
    summary.windows(2).all(|w| w[1].median_hdr <= w[0].median_hdr)
}

/// Number of images annotated at a given fraction of the training pool.
pub fn images_for_fraction(fraction: f64, n_train: usize) -> usize {
    ((fraction * n_train as f64).round() as usize).clamp(2, n_train)
}

/// HDR on a fixed held-out set as a function of how many training images
/// carry labels. Subsets are nested: each seed fixes one random image
/// order and a fraction keeps its prefix, re-annotated under the standard
/// protocol. Epoch count is fixed, so larger subsets also get more steps.
pub fn sweep_labels(config: &SweepConfig, mut on_point: impl FnMut(&SweepPoint)) -> Result<Vec<SweepPoint>> {
    if config.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::Config("fractions must lie in (0, 1]".into()));
    }
    let mut points = Vec::new();
    for &seed in &config.seeds {
        let pool = build_synth_dataset(rng::derive_seed(seed, "sweep-train"), config.n_train, &config.synth)?;
        let held = build_synth_dataset(
            rng::derive_seed(seed, "sweep-heldout"),
            config.n_heldout,
            &heldout_config(&config.synth),
        )?;
        let mut order: Vec<&str> = pool.manifest.images().iter().map(|e| e.image_id.as_str()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng::derive(seed, "sweep-order"));
        for &fraction in &config.fractions {
            let k = images_for_fraction(fraction, config.n_train);
            let subset = pool.subset(order[..k].iter().copied(), rng::derive_seed(seed, "sweep-pairs"))?;
            let cfg = TrainConfig {
                epochs: config.epochs,
                ..desk_train_config(seed)
            };
            let result = train_and_score(cfg, &subset, &held, &held.annotations, config.tau, config.weights)?;
            let point = SweepPoint {
                fraction,
                seed,
                n_images: k,
                n_labels: subset.annotations.len(),
                result,
            };
            on_point(&point);
            points.push(point);
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(hdr: f64) -> HdrRow {
        HdrRow {
            tau: 0.25,
            hdr,
            hdr_eq: None,
            hdr_neq: None,
            n: 1,
            n_eq: 0,
            n_neq: 1,
        }
    }

    #[test]
    fn medians_and_monotonicity() {
        let pts: Vec<SweepPoint> = [(0.1, 0.4), (0.1, 0.2), (0.1, 0.3), (1.0, 0.1), (1.0, 0.5), (1.0, 0.2)]
            .iter()
            .enumerate()
            .map(|(i, &(f, h))| SweepPoint {
                fraction: f,
                seed: i as u64,
                n_images: 1,
                n_labels: 1,
                result: row(h),
            })
            .collect();
        let s = sweep_medians(&[0.1, 1.0], &pts);
        assert_eq!(s[0].median_hdr, 0.3);
        assert_eq!(s[1].median_hdr, 0.2);
        assert!(is_non_increasing(&s));
    }

    #[test]
    fn fraction_sizes() {
        assert_eq!(images_for_fraction(0.05, 200), 10);
        assert_eq!(images_for_fraction(1.0, 200), 200);
        assert_eq!(images_for_fraction(0.001, 200), 2);
    }

    #[test]
    fn tiny_ablation_runs() {
        let cfg = AblationConfig {
            n_train: 6,
            n_heldout: 4,
            seeds: vec![0],
            epochs: 1,
            ..AblationConfig::default()
        };
        let rows = cross_ablation(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].intra_only.n, 4);
    }
}
