//! Train an LSTM with attention on planted keywords and print which tokens
//! the attention weights pick out.
//!
//! cargo run --release --example attention_weights

use icd_notes::icd::LabelMode;
use icd_notes::models::{ModelConfig, Variant};
use icd_notes::synthetic::{generate, SyntheticSpec};
use icd_notes::text::PreprocessConfig;
use icd_notes::train::{prepare, run_variant, Manifest, TrainConfig};

fn main() -> icd_notes::Result<()> {
    let notes = generate(&SyntheticSpec {
        num_notes: 800,
        num_classes: 4,
        min_words: 20,
        max_words: 60,
        seed: 11,
        ..Default::default()
    })?;
    let manifest = Manifest {
        variants: vec![Variant::LstmAttention],
        label_mode: LabelMode::Level1Chapters,
        epochs: 15,
        seed: 11,
        preprocess: PreprocessConfig {
            max_len: 80,
            ..Default::default()
        },
        model: ModelConfig {
            embedding_dim: 16,
            lstm_hidden_dim: 16,
            attention_dim: 8,
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
    let data = prepare(&notes, &manifest.data_config()?)?;
    let run = run_variant(&manifest, &data, Variant::LstmAttention)?;
    println!("test F1 {:.4}", run.test.f1);
    let model = run.model.expect("neural variant");
    for ex in data.test.iter().take(3) {
        let (_, sites) = model.logits_with_attention(&ex.note)?;
        let (_, weights) = &sites[0];
        let mut ranked: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let top: Vec<String> = ranked
            .iter()
            .take(4)
            .map(|&(i, w)| format!("{}={w:.2}", data.vocab.token(ex.note.ids[i]).unwrap_or("?")))
            .collect();
        println!("{} {:?}: {}", ex.note.note_id, ex.note.codes, top.join(" "));
    }
    Ok(())
}
