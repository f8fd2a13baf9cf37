//! Procedural scenes with a known traversability field, written to disk
//! as a ready-to-train dataset.
//!
//!     cargo run --example synthetic_world -- [out_dir] [n_scenes] [--stress]

use std::path::PathBuf;

use reltrav::synthworld::{build_synth_dataset, SceneFamily, SynthConfig};

fn main() -> reltrav::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let stress = args.iter().any(|a| a == "--stress");
    let mut pos = args.iter().filter(|a| !a.starts_with("--"));
    let out = pos.next().map_or_else(|| std::env::temp_dir().join("reltrav-synth"), PathBuf::from);
    let n: usize = pos.next().map_or(20, |s| s.parse().expect("n_scenes"));

    let cfg = if stress { SynthConfig::stress() } else { SynthConfig::default() };
    for family in [SceneFamily::A, SceneFamily::B] {
        println!("family {family:?}: score levels {:?}", cfg.score_levels(family));
    }

    let ds = build_synth_dataset(42, n, &cfg)?;
    let eq = ds.annotations.iter().filter(|a| a.t.is_equality()).count();
    println!("{} scenes, {} labels ({} equal, {} unequal)", n, ds.annotations.len(), eq, ds.annotations.len() - eq);
    for entry in ds.manifest.images().iter().take(3) {
        let scene = ds.scene(&entry.image_id).expect("scene exists");
        println!(
            "  {}: family {:?}, {} regions, scores {:?}",
            entry.image_id,
            scene.family,
            scene.region_scores.len(),
            scene.region_scores.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
        );
    }
    let paths = ds.write(&out)?;
    println!("wrote {} and {}", paths.manifest.display(), paths.annotations.display());
    Ok(())
}
