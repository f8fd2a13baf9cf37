//! Evaluation: disagreement rates against ordinal labels, tier cutoff
//! calibration, and 4-class segmentation scores.

mod hdr;
mod seg;
mod tiers;

pub use hdr::{hdr, ordinal_of, HdrReport, HdrRow, DEFAULT_THRESHOLDS};
pub use seg::{seg_metrics, ConfusionMatrix, SegMetrics, NUM_TIERS};
pub use tiers::{discretize, tier_cutoffs, tier_of, TierCutoffs, TierStats, TierStatsAccumulator};
