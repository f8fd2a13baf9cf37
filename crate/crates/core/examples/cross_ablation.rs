//! Does adding cross-image pairs help rank points across scenes? Trains
//! intra+cross and intra-only models on the same label budget and scores
//! both on held-out cross-image pairs.
//!
//!     cargo run --release --example cross_ablation -- [seeds...]

use reltrav::studies::{cross_ablation, AblationConfig};

fn main() -> reltrav::Result<()> {
    let seeds: Vec<u64> = std::env::args().skip(1).map(|s| s.parse().expect("seed")).collect();
    let cfg = AblationConfig {
        seeds: if seeds.is_empty() { vec![0, 1, 2] } else { seeds },
        ..AblationConfig::default()
    };
    println!("{:>4}  {:>12}  {:>12}", "seed", "intra+cross", "intra-only");
    let rows = cross_ablation(&cfg, |r| {
        let f = |v: Option<f64>| v.map_or("n/a".into(), |h| format!("{h:.4}"));
        println!("{:>4}  {:>12}  {:>12}", r.seed, f(r.intra_cross.hdr_neq), f(r.intra_only.hdr_neq));
    })?;
    let wins = rows.iter().filter(|r| r.cross_helps()).count();
    println!("cross pairs lower HDR_neq on {wins}/{} seeds", rows.len());
    Ok(())
}
