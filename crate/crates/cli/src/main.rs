use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use reltrav::eval::{calibrate_cutoffs, evaluate_hdr, evaluate_segmentation, Predictor, Weights};
use reltrav::losses::PairLoss;
use reltrav::metrics::TierCutoffs;
use reltrav::model::Checkpoint;
use reltrav::pairgen::{autolabel_tasks, generate_pair_tasks, load_tasks, write_tasks, LabelAccounting, PairGenOptions, TierTable};
use reltrav::store::{load_annotations, write_annotations};
use reltrav::studies::{cross_ablation, sweep_labels, sweep_medians, is_non_increasing, AblationConfig, SweepConfig};
use reltrav::synthworld::{build_synth_dataset, SynthConfig};
use reltrav::trainer::{write_log, ImageSet, Trainer, TrainConfig};
use reltrav::{load_manifest, rng, Error, Result};
use reltrav_service::TaskService;

#[derive(Parser)]
#[command(name = "reltrav", version, about = "Relative traversability from pairwise ordinal labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one intra-image and one cross-image pair task per image.
    Pairgen {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        intra_only: bool,
        /// Fraction of points drawn from the bottom half of the image.
        #[arg(long)]
        bottom_bias: Option<f64>,
    },
    /// Label tasks automatically from semantic class maps and a tier table.
    Autolabel {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        /// Tier table JSON; the built-in RUGD table when omitted.
        #[arg(long)]
        tiers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic dataset with ground-truth fields and oracle labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disjoint score ranges for the two scene families.
        #[arg(long)]
        stress_calibration: bool,
        /// Also write this many held-out scenes under OUT/heldout.
        #[arg(long)]
        heldout: Option<usize>,
    },
    /// Train student and mean teacher from pairwise annotations.
    Train(TrainArgs),
    /// Human disagreement rate of a checkpoint on labeled pairs.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5")]
        thresholds: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "teacher")]
        weights: Weights,
    },
    /// Tier cutoffs from per-tier score statistics.
    Calibrate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tiers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "teacher")]
        weights: Weights,
    },
    /// Segmentation metrics of discretized predictions.
    Segeval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        cutoffs: PathBuf,
        #[arg(long)]
        tiers: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "teacher")]
        weights: Weights,
    },
    /// Run the annotation task server.
    Serve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        /// Append-only label log, created if missing.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// HDR against the number of annotated training images, on synthetic data.
    SweepLabels {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.25,0.5,1.0")]
        fractions: Vec<f64>,
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Intra+cross against intra-only training at equal label budget.
    Ablation {
        #[command(flatten)]
        study: StudyArgs,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value = "rizz")]
    loss: PairLoss,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value_t = 1.0)]
    snow_clamp: f64,
    #[arg(long, default_value_t = 0.99)]
    alpha: f64,
    /// Consistency weight.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    intra_only: bool,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    out: PathBuf,
    /// Per-step loss log (JSONL).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 200)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_heldout: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.25)]
    tau: f64,
    #[arg(long, default_value = "teacher")]
    weights: Weights,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn tier_table(path: Option<&Path>) -> Result<TierTable> {
    path.map_or_else(|| Ok(TierTable::rugd_default()), TierTable::load)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("record serializes") + "\n")
        .collect()
}

fn predictor(checkpoint: &Path, weights: Weights) -> Result<Predictor> {
    Predictor::from_checkpoint(&Checkpoint::load(checkpoint)?, weights)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pairgen {
            manifest,
            out,
            seed,
            intra_only,
            bottom_bias,
        } => {
            let m = load_manifest(&manifest)?;
            let options = PairGenOptions {
                bottom_bias,
                ..if intra_only {
                    PairGenOptions::intra_only()
                } else {
                    PairGenOptions::default()
                }
            };
            let tasks = generate_pair_tasks(&m, seed, &options)?;
            write_tasks(&out, &tasks)?;
            let acc = LabelAccounting::of_kinds(m.len(), tasks.iter().map(|t| t.kind));
            println!(
                "{} tasks ({} intra, {} cross) for {} images: {} equivalent labels, {:.3} per image",
                acc.tasks,
                acc.intra,
                acc.cross,
                acc.images,
                acc.equivalent_labels,
                acc.labels_per_image()
            );
        }
        Command::Autolabel {
            manifest,
            tasks,
            tiers,
            out,
        } => {
            let m = load_manifest(&manifest)?;
            let anns = autolabel_tasks(&m, &load_tasks(&tasks)?, &tier_table(tiers.as_deref())?)?;
            write_annotations(&out, &anns)?;
            let eq = anns.iter().filter(|a| a.t.is_equality()).count();
            println!("{} labels ({} equal, {} unequal)", anns.len(), eq, anns.len() - eq);
        }
        Command::Synth {
            out,
            n,
            seed,
            stress_calibration,
            heldout,
        } => {
            let cfg = if stress_calibration {
                SynthConfig::stress()
            } else {
                SynthConfig::default()
            };
            let ds = build_synth_dataset(seed, n, &cfg)?;
            let paths = ds.write(&out)?;
            println!("{} scenes, {} labels -> {}", n, ds.annotations.len(), paths.manifest.display());
            if let Some(k) = heldout {
                let hcfg = SynthConfig {
                    id_prefix: format!("{}-heldout", cfg.id_prefix),
                    ..cfg
                };
                let held = build_synth_dataset(rng::derive_seed(seed, "heldout"), k, &hcfg)?;
                let hp = held.write(out.join("heldout"))?;
                println!("{} held-out scenes, {} labels -> {}", k, held.annotations.len(), hp.manifest.display());
            }
        }
        Command::Train(args) => train(args)?,
        Command::Eval {
            checkpoint,
            manifest,
            annotations,
            thresholds,
            out,
            weights,
        } => {
            let m = load_manifest(&manifest)?;
            let anns = load_annotations(&annotations)?;
            let mut p = predictor(&checkpoint, weights)?;
            let report = evaluate_hdr(&mut p, &m, &ImageSet::load(&m)?, &anns, &thresholds)?;
            write_text(&out, &report.to_jsonl())?;
            print!("{}", report.to_table());
        }
        Command::Calibrate {
            checkpoint,
            manifest,
            tiers,
            out,
            weights,
        } => {
            let m = load_manifest(&manifest)?;
            let mut p = predictor(&checkpoint, weights)?;
            let cutoffs = calibrate_cutoffs(&mut p, &m, &ImageSet::load(&m)?, &tier_table(tiers.as_deref())?)?;
            write_text(&out, &to_json(&cutoffs))?;
            let [c3, c2, c1] = cutoffs.values();
            println!("cutoff_3 {c3:.6}  cutoff_2 {c2:.6}  cutoff_1 {c1:.6}");
        }
        Command::Segeval {
            checkpoint,
            manifest,
            cutoffs,
            tiers,
            out,
            weights,
        } => {
            let m = load_manifest(&manifest)?;
            let text = fs::read_to_string(&cutoffs).map_err(|e| Error::io(&cutoffs, e))?;
            let cut: TierCutoffs = serde_json::from_str(&text).map_err(|e| Error::parse(&cutoffs, 1, e))?;
            let mut p = predictor(&checkpoint, weights)?;
            let metrics = evaluate_segmentation(&mut p, &m, &ImageSet::load(&m)?, &tier_table(tiers.as_deref())?, &cut)?;
            write_text(&out, &to_json(&metrics))?;
            println!(
                "mIoU {:.4}  fwIoU {:.4}  mAcc {:.4}  fwAcc {:.4}",
                metrics.miou, metrics.fw_miou, metrics.macc, metrics.fw_macc
            );
        }
        Command::Serve {
            manifest,
            tasks,
            annotations,
            port,
            host,
        } => {
            let svc = Arc::new(TaskService::open(&manifest, &tasks, &annotations).map_err(service_error)?);
            let rt = tokio::runtime::Builder::new_current_thread()
                .enable_all()
                .build()
                .map_err(|e| Error::io("<runtime>", e))?;
            rt.block_on(async {
                let addr = format!("{host}:{port}");
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .map_err(|e| Error::io(&addr, e))?;
                println!("serving {} tasks on http://{addr}", svc.progress(std::time::Instant::now()).total);
                reltrav_service::serve(listener, svc).await.map_err(|e| Error::io(&addr, e))
            })?;
        }
        Command::SweepLabels { fractions, study } => {
            let cfg = SweepConfig {
                fractions: fractions.clone(),
                seeds: study.seeds,
                n_train: study.n_train,
                n_heldout: study.n_heldout,
                tau: study.tau,
                epochs: study.epochs,
                weights: study.weights,
                ..SweepConfig::default()
            };
            let points = sweep_labels(&cfg, |p| {
                println!(
                    "seed {} fraction {:.2}: {} images, {} labels, HDR {:.4}",
                    p.seed, p.fraction, p.n_images, p.n_labels, p.result.hdr
                )
            })?;
            let summary = sweep_medians(&fractions, &points);
            for s in &summary {
                println!("fraction {:.2}: median HDR {:.4}", s.fraction, s.median_hdr);
            }
            println!("non-increasing: {}", is_non_increasing(&summary));
            if let Some(out) = study.out {
                write_text(&out, &jsonl(&points))?;
            }
        }
        Command::Ablation { study } => {
            let cfg = AblationConfig {
                seeds: study.seeds,
                n_train: study.n_train,
                n_heldout: study.n_heldout,
                tau: study.tau,
                epochs: study.epochs,
                weights: study.weights,
                ..AblationConfig::default()
            };
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |h| format!("{h:.4}"));
            let rows = cross_ablation(&cfg, |r| {
                println!(
                    "seed {}: cross-pair HDR_neq intra+cross {} vs intra-only {}",
                    r.seed,
                    fmt(r.intra_cross.hdr_neq),
                    fmt(r.intra_only.hdr_neq)
                )
            })?;
            println!("cross pairs help on every seed: {}", rows.iter().all(|r| r.cross_helps()));
            if let Some(out) = study.out {
                write_text(&out, &jsonl(&rows))?;
            }
        }
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let m = load_manifest(&args.manifest)?;
    let anns = load_annotations(&args.annotations)?;
    let mut cfg = TrainConfig {
        loss: args.loss,
        alpha: args.alpha,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        intra_only: args.intra_only,
        max_steps: args.max_steps,
        ..TrainConfig::default()
    };
    cfg.loss_config.margin = args.margin;
    cfg.loss_config.snow_clamp = args.snow_clamp;
    cfg.loss_config.consistency_weight = args.lambda;
    cfg.optimizer.lr = args.lr;
    cfg.augment.enabled = !args.no_augment;
    let images = ImageSet::load(&m)?;
    let trainer = Trainer::new(cfg, &m, &images, &anns)?;
    let total = trainer.total_steps();
    let every = (total / 20).max(1);
    let outcome = trainer.run(|r| {
        if r.step % every == 0 || r.step == total {
            println!("step {:>6}/{total}  acc {:.5}  cons {:.6}  total {:.5}", r.step, r.acc_loss, r.cons_loss, r.total);
        }
    })?;
    outcome.checkpoint.save(&args.out)?;
    if let Some(log) = &args.log {
        write_log(log, &outcome.log)?;
    }
    println!("checkpoint -> {}", args.out.display());
    Ok(())
}

fn service_error(e: reltrav_service::ServiceError) -> Error {
    match e {
        reltrav_service::ServiceError::Core(e) => e,
        other => Error::Config(other.to_string()),
    }
}
