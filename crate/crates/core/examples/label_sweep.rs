//! Held-out HDR as the number of annotated training images grows.
//!
//!     cargo run --release --example label_sweep -- [seeds...]

use reltrav::studies::{is_non_increasing, sweep_labels, sweep_medians, SweepConfig};

fn main() -> reltrav::Result<()> {
    let seeds: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().expect("seed")).collect();
    let cfg = SweepConfig {
        seeds: if seeds.is_empty() { vec![0, 1, 2] } else { seeds },
        ..SweepConfig::default()
    };
    let points = sweep_labels(&cfg, |p| {
        println!(
            "seed {} | {:>5.0}% = {:>3} images, {:>3} labels | HDR {:.4}",
            p.seed,
            100.0 * p.fraction,
            p.n_images,
            p.n_labels,
            p.result.hdr
        );
    })?;
    let summary = sweep_medians(&cfg.fractions, &points);
    for s in &summary {
        let bar = "#".repeat((s.median_hdr * 60.0).round() as usize);
        println!("{:>5.0}%  {:.4}  {bar}", 100.0 * s.fraction, s.median_hdr);
    }
    println!("monotone non-increasing: {}", is_non_increasing(&summary));
    Ok(())
}
