//! Pair-task generation on a manifest and the label accounting it implies.
//!
//!     cargo run --example pair_protocol -- [n_images]

use reltrav::manifest::{DatasetManifest, ImageEntry, Resolution};
use reltrav::pairgen::{generate_pair_tasks, LabelAccounting, PairGenOptions};
use reltrav::types::min_pair_distance;
use reltrav::PairKind;

fn main() -> reltrav::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(16558, |s| s.parse().expect("n_images"));
    let entries = (0..n)
        .map(|i| ImageEntry {
            image_id: format!("frame{i:05}"),
            path: format!("frames/{i:05}.png"),
            width: 424,
            height: 240,
            gt_path: None,
        })
        .collect();
    let manifest = DatasetManifest::from_entries(Resolution::default(), entries)?;

    let tasks = generate_pair_tasks(&manifest, 0, &PairGenOptions::default())?;
    let acc = LabelAccounting::of_kinds(manifest.len(), tasks.iter().map(|t| t.kind));
    println!("{} images -> {} tasks ({} intra, {} cross)", acc.images, acc.tasks, acc.intra, acc.cross);
    println!(
        "equivalent labels {} = {:.2} per image (a cross pair serves both of its images)",
        acc.equivalent_labels,
        acc.labels_per_image()
    );

    let threshold = min_pair_distance(424, 240);
    let closest = tasks
        .iter()
        .filter(|t| t.kind == PairKind::Intra)
        .map(|t| t.a.distance(&t.b))
        .fold(f64::INFINITY, f64::min);
    println!("closest intra pair {closest:.2} px (minimum {threshold} px)");

    let biased = generate_pair_tasks(
        &manifest,
        0,
        &PairGenOptions {
            bottom_bias: Some(0.9),
            ..PairGenOptions::default()
        },
    )?;
    let bottom = biased.iter().filter(|t| t.a.y >= 120).count() as f64 / biased.len() as f64;
    println!("with bottom bias 0.9: {:.1}% of first points in the lower half", 100.0 * bottom);

    for t in tasks.iter().take(4) {
        println!("{}", serde_json::to_string(t).expect("task serializes"));
    }
    Ok(())
}
