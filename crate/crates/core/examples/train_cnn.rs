//! Train the CNN (or any variant) on a noisy synthetic corpus next to the
//! frequency baseline and print held-out micro-F1 plus the training curve.
//!
//! cargo run --release --example train_cnn [variant] [epochs]

use icd_notes::models::{ModelConfig, Variant};
use icd_notes::synthetic::{generate, SyntheticSpec};
use icd_notes::text::PreprocessConfig;
use icd_notes::train::{run_experiment_on, Manifest, TrainConfig};

fn main() -> icd_notes::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().as_deref().unwrap_or("cnn").parse()?;
    let epochs = args.next().map_or(10, |s| s.parse().expect("epochs"));

    let notes = generate(&SyntheticSpec {
        num_notes: 1000,
        noise_fraction: 0.3,
        seed: 7,
        ..Default::default()
    })?;
    // Desk-scale sizes: large enough to learn the planted keywords, small
    // enough to train in well under a minute.
    let manifest = Manifest {
        variants: vec![Variant::Baseline, variant],
        epochs,
        seed: 7,
        preprocess: PreprocessConfig {
            max_len: 200,
            ..Default::default()
        },
        model: ModelConfig {
            embedding_dim: 32,
            cnn_filters_per_window: 32,
            lstm_hidden_dim: 32,
            attention_dim: 16,
            dropout_rate: 0.0,
            ..Default::default()
        },
        train: TrainConfig {
            batch_size: 8,
            learning_rate: 0.02,
            ..Default::default()
        },
        ..Default::default()
    };
    let report = run_experiment_on(&manifest, &notes)?;
    print!("{}", report.test_csv());
    for run in &report.runs {
        for r in &run.history {
            println!("{} epoch {:>2}: loss {:.4}  val F1 {:.4}", run.variant, r.epoch, r.train_loss, r.val_f1);
        }
    }
    Ok(())
}
