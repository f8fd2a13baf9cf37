//! Human disagreement rate of a trained model on held-out pairs, next to
//! the ground-truth oracle and an untrained network.
//!
//!     cargo run --release --example hdr_evaluation

use reltrav::eval::{evaluate_hdr, Predictor, Weights};
use reltrav::metrics::{hdr, ordinal_of};
use reltrav::model::TraversabilityNet;
use reltrav::rng;
use reltrav::studies::desk_train_config;
use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav::trainer::{train, TrainConfig};

const TAUS: [f64; 3] = [0.1, 0.25, 0.5];

fn main() -> reltrav::Result<()> {
    println!("ordinal_of(0.2, 0.6, 0.25) = {}", ordinal_of(0.2, 0.6, 0.25));
    println!("ordinal_of(0.5, 0.5, 0.25) = {}", ordinal_of(0.5, 0.5, 0.25));

    let cfg = SynthConfig::default();
    let train_set = build_synth_dataset(3, 80, &cfg)?;
    let held_cfg = SynthConfig {
        id_prefix: "heldout".into(),
        ..cfg
    };
    let held = build_synth_dataset(4, 50, &held_cfg)?;
    let held_images = held.image_set();
    let labels: Vec<_> = held.annotations.iter().map(|a| a.t).collect();

    let gt: Vec<_> = held
        .annotations
        .iter()
        .map(|a| Ok((held.gt_at(&a.a)?, held.gt_at(&a.b)?)))
        .collect::<reltrav::Result<_>>()?;
    println!("\nground truth as predictor\n{}", hdr(&gt, &labels, &TAUS)?.to_table());

    let tc = TrainConfig {
        epochs: 6,
        ..desk_train_config(0)
    };
    let net = TraversabilityNet::new(reltrav::model::ModelConfig::new(held.manifest.resolution()))?;
    let init = net.init_params(&mut rng::derive(0, "init"));
    let mut untrained = Predictor::new(net, init)?;
    println!(
        "untrained network\n{}",
        evaluate_hdr(&mut untrained, &held.manifest, &held_images, &held.annotations, &TAUS)?.to_table()
    );

    let outcome = train(tc, &train_set.manifest, &train_set.image_set(), &train_set.annotations)?;
    for weights in [Weights::Teacher, Weights::Student] {
        let mut p = Predictor::from_checkpoint(&outcome.checkpoint, weights)?;
        let report = evaluate_hdr(&mut p, &held.manifest, &held_images, &held.annotations, &TAUS)?;
        println!("trained, {weights:?} weights\n{}", report.to_table());
    }
    Ok(())
}
