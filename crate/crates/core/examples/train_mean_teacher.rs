//! Student/teacher training on synthetic scenes, saving a checkpoint and
//! the per-step loss log.
//!
//!     cargo run --release --example train_mean_teacher -- [n_scenes] [epochs] [loss]

use reltrav::losses::PairLoss;
use reltrav::model::Checkpoint;
use reltrav::studies::desk_train_config;
use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav::trainer::{write_log, TrainConfig, Trainer};

fn main() -> reltrav::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(60, |s| s.parse().expect("n_scenes"));
    let epochs: usize = args.next().map_or(5, |s| s.parse().expect("epochs"));
    let loss: PairLoss = args.next().map_or(Ok(PairLoss::Rizz), |s| s.parse())?;

    let ds = build_synth_dataset(1, n, &SynthConfig::default())?;
    let images = ds.image_set();
    let cfg = TrainConfig {
        loss,
        epochs,
        ..desk_train_config(0)
    };
    println!(
        "{loss} on {} labels, lr {}, alpha {}, lambda {}",
        ds.annotations.len(),
        cfg.optimizer.lr,
        cfg.alpha,
        cfg.loss_config.consistency_weight
    );

    let trainer = Trainer::new(cfg, &ds.manifest, &images, &ds.annotations)?;
    let per_epoch = trainer.steps_per_epoch();
    let mut epoch = (0.0, 0.0, 0);
    let outcome = trainer.run(|r| {
        epoch = (epoch.0 + r.acc_loss, epoch.1 + r.cons_loss, epoch.2 + 1);
        if epoch.2 == per_epoch {
            let k = epoch.2 as f64;
            println!("epoch {:>2}: acc {:.4}  cons {:.6}", r.step / per_epoch, epoch.0 / k, epoch.1 / k);
            epoch = (0.0, 0.0, 0);
        }
    })?;

    let dir = std::env::temp_dir();
    let ckpt = dir.join("reltrav-demo.ckpt");
    outcome.checkpoint.save(&ckpt)?;
    write_log(dir.join("reltrav-demo-log.jsonl"), &outcome.log)?;
    let meta = Checkpoint::load(&ckpt)?.meta;
    println!("saved {} (step {}, margin {}, encoder {:?})", ckpt.display(), meta.step, meta.margin, meta.model.encoder_widths);
    Ok(())
}
