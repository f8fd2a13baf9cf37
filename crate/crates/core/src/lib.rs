//! Relative traversability estimation from sparse pairwise ordinal labels.
//!
//! The crate covers the whole workflow:
//!
//! - [`manifest`], [`types`], [`store`]: datasets, pair annotations and the
//!   append-only annotation log.
//! - [`pairgen`]: random intra-/cross-image pair tasks and tier-based
//!   automatic labels.
//! - [`losses`]: the ranking-loss family and the consistency objective.
//! - [`model`]: a small encoder-decoder regression network with a sigmoid
//!   head, checkpoints and the teacher moving average.
//! - [`trainer`]: mean-teacher training with shared geometric augmentation
//!   and inequality oversampling.
//! - [`metrics`]: human disagreement rates, tier cutoffs and segmentation
//!   scores.
//! - [`eval`]: running a trained network over a manifest and scoring it.
//! - [`raster`]: image loading and traversability maps.
//! - [`synthworld`]: procedural scenes with dense ground truth and a label
//!   oracle for end-to-end checks.
//! - [`studies`]: the cross-image ablation and the label-budget sweep.
//!
//! Runnable walkthroughs live in this crate's `examples/` directory.

pub mod error;
pub mod eval;
pub mod losses;
pub mod manifest;
pub mod metrics;
pub mod model;
pub mod pairgen;
pub mod raster;
pub mod rng;
pub mod store;
pub mod studies;
pub mod synthworld;
pub mod trainer;
pub mod types;

pub use error::{Error, Result};
pub use manifest::{load_manifest, DatasetManifest, ImageEntry, Resolution};
pub use raster::{RgbImage, TraversabilityMap};
pub use types::{LabelSource, Ordinal, PairAnnotation, PairKind, PointRef};
