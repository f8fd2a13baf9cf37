use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairgen::Tier;

pub const NUM_TIERS: usize = 4;

/// `counts[gt][pred]` pixel counts over the four tiers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; NUM_TIERS]; NUM_TIERS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub miou: f64,
    pub fw_miou: f64,
    pub macc: f64,
    pub fw_macc: f64,
    /// `None` for classes absent from the ground truth.
    pub iou: [Option<f64>; NUM_TIERS],
    pub acc: [Option<f64>; NUM_TIERS],
}

impl ConfusionMatrix {
    pub fn add(&mut self, pred: &[Tier], gt: &[Tier]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::shape(gt.len(), pred.len()));
        }
        for (&p, &g) in pred.iter().zip(gt) {
            if p as usize >= NUM_TIERS || g as usize >= NUM_TIERS {
                return Err(Error::Config(format!("tier out of range: pred {p}, gt {g}")));
            }
            self.counts[g as usize][p as usize] += 1;
        }
        Ok(())
    }

    pub fn counts(&self) -> &[[u64; NUM_TIERS]; NUM_TIERS] {
        &self.counts
    }

    /// Per-class IoU and accuracy (recall); unweighted means over classes
    /// present in the ground truth, weighted means by ground-truth pixel
    /// frequency.
    pub fn metrics(&self) -> Result<SegMetrics> {
        let total: u64 = self.counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::EmptySet);
        }
        let mut iou = [None; NUM_TIERS];
        let mut acc = [None; NUM_TIERS];
        let (mut fw_miou, mut fw_macc) = (0.0, 0.0);
        for c in 0..NUM_TIERS {
            let gt_c: u64 = self.counts[c].iter().sum();
            if gt_c == 0 {
                continue;
            }
            let tp = self.counts[c][c];
            let pred_c: u64 = (0..NUM_TIERS).map(|g| self.counts[g][c]).sum();
            let union = gt_c + pred_c - tp;
            let i = tp as f64 / union as f64;
            let a = tp as f64 / gt_c as f64;
            let freq = gt_c as f64 / total as f64;
            iou[c] = Some(i);
            acc[c] = Some(a);
            fw_miou += freq * i;
            fw_macc += freq * a;
        }
        let mean = |xs: &[Option<f64>]| {
            let v: Vec<f64> = xs.iter().flatten().copied().collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        Ok(SegMetrics {
            miou: mean(&iou),
            fw_miou,
            macc: mean(&acc),
            fw_macc,
            iou,
            acc,
        })
    }
}

pub fn seg_metrics(pred: &[Tier], gt: &[Tier]) -> Result<SegMetrics> {
    let mut cm = ConfusionMatrix::default();
    cm.add(pred, gt)?;
    cm.metrics()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_maps_score_one() {
        let m = seg_metrics(&[0, 1, 2, 3, 3], &[0, 1, 2, 3, 3]).unwrap();
        assert_eq!((m.miou, m.fw_miou, m.macc, m.fw_macc), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn complement_of_balanced_two_class_map() {
        let m = seg_metrics(&[2, 2, 3, 3], &[3, 3, 2, 2]).unwrap();
        assert_eq!(m.miou, 0.0);
        assert_eq!(m.macc, 0.0);
    }

    #[test]
    fn four_pixel_example() {
        let m = seg_metrics(&[3, 2, 2, 0], &[3, 3, 2, 0]).unwrap();
        assert_eq!(m.iou, [Some(1.0), None, Some(0.5), Some(0.5)]);
        assert!((m.miou - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.fw_miou - 5.0 / 8.0).abs() < 1e-15);
        assert!((m.macc - 5.0 / 6.0).abs() < 1e-15);
        assert!((m.fw_macc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(seg_metrics(&[0], &[0, 1]), Err(Error::ShapeMismatch { .. })));
    }
}
