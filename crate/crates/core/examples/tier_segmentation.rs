//! Tier-based auto-labeling, cutoff calibration and segmentation scores on
//! a small scene set with semantic class maps.
//!
//!     cargo run --release --example tier_segmentation

use reltrav::eval::{calibrate_cutoffs, evaluate_segmentation, Predictor, Weights};
use reltrav::manifest::{DatasetManifest, ImageEntry, Resolution};
use reltrav::metrics::{seg_metrics, tier_cutoffs};
use reltrav::pairgen::{autolabel_tasks, generate_pair_tasks, PairGenOptions, TierTable};
use reltrav::studies::desk_train_config;
use reltrav::trainer::{train, ImageSet, TrainConfig};
use reltrav::RgbImage;

/// Horizontal bands of four classes, one per tier, with a colour per class
/// and band order rotating from image to image.
fn banded_scenes(dir: &std::path::Path, tiers: &TierTable, n: usize) -> reltrav::Result<DatasetManifest> {
    let classes = ["asphalt", "gravel", "bush", "building"].map(|c| tiers.class_by_name(c).expect("rugd class"));
    let colours = [[0.75, 0.75, 0.78], [0.55, 0.5, 0.4], [0.15, 0.55, 0.2], [0.6, 0.25, 0.2]];
    let (w, h) = (64usize, 48usize);
    let mut entries = Vec::new();
    for i in 0..n {
        let band = |y: usize| (y * 4 / h + i) % 4;
        let mut img = RgbImage::zeros(h, w);
        let mut gt = image::GrayImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    img.set(c, y, x, colours[band(y)][c]);
                }
                gt.put_pixel(x as u32, y as u32, image::Luma([classes[band(y)] as u8]));
            }
        }
        img.save_png(dir.join(format!("scene{i}.png")))?;
        gt.save(dir.join(format!("scene{i}-gt.png"))).expect("writes class map");
        entries.push(ImageEntry {
            image_id: format!("scene{i}"),
            path: format!("scene{i}.png"),
            width: w as u32,
            height: h as u32,
            gt_path: Some(format!("scene{i}-gt.png")),
        });
    }
    Ok(DatasetManifest::from_entries(Resolution::new(h, w), entries)?.with_base_dir(dir))
}

fn main() -> reltrav::Result<()> {
    // Cutoffs from hand-picked tier statistics.
    let scores = [(0, vec![0.1]), (1, vec![0.3]), (2, vec![0.5, 0.7]), (3, vec![0.85, 0.95])].into_iter().collect();
    let c = tier_cutoffs(&scores)?;
    println!("cutoffs from fixed scores: {:?}", c.values());
    let m = seg_metrics(&[3, 2, 2, 0], &[3, 3, 2, 0])?;
    println!("4-pixel example: mIoU {:.4} fwIoU {:.4} mAcc {:.4} fwAcc {:.4}\n", m.miou, m.fw_miou, m.macc, m.fw_macc);

    let dir = std::env::temp_dir().join("reltrav-tiers");
    std::fs::create_dir_all(&dir).expect("creates scratch dir");
    let tiers = TierTable::rugd_default();
    let manifest = banded_scenes(&dir, &tiers, 8)?;
    let tasks = generate_pair_tasks(&manifest, 7, &PairGenOptions::default())?;
    let anns = autolabel_tasks(&manifest, &tasks, &tiers)?;
    let eq = anns.iter().filter(|a| a.t.is_equality()).count();
    println!("auto-labeled {} pairs ({} equal)", anns.len(), eq);

    let images = ImageSet::load(&manifest)?;
    let tc = TrainConfig {
        epochs: 40,
        ..desk_train_config(0)
    };
    let outcome = train(tc, &manifest, &images, &anns)?;
    let mut p = Predictor::from_checkpoint(&outcome.checkpoint, Weights::Teacher)?;
    let cutoffs = calibrate_cutoffs(&mut p, &manifest, &images, &tiers)?;
    for s in &cutoffs.stats {
        println!("tier {}: mean {:.3} std {:.3} over {} px", s.tier, s.mean, s.std, s.n);
    }
    println!("cutoffs {:?}", cutoffs.values());
    let seg = evaluate_segmentation(&mut p, &manifest, &images, &tiers, &cutoffs)?;
    println!("mIoU {:.4} fwIoU {:.4} mAcc {:.4} fwAcc {:.4}", seg.miou, seg.fw_miou, seg.macc, seg.fw_macc);
    Ok(())
}
