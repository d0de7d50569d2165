//! Compare analytic gradients of every model variant against central
//! finite differences.
//!
//! cargo run --release --example gradient_check

use icd_notes::models::{Mode, Model, ModelConfig, Variant};
use icd_notes::rng::{RngState, Stream};
use icd_notes::text::{EncodedNote, PAD};

const STEP: f64 = 1e-5;

fn note(config: &ModelConfig) -> EncodedNote {
    let ids: Vec<usize> = (0..config.max_len).map(|i| if i < 11 { 3 + i % 9 } else { PAD }).collect();
    EncodedNote {
        note_id: "g".into(),
        ids,
        true_length: 11,
        sentence_spans: vec![(0, 4), (4, 9), (9, 11)],
        codes: vec![],
    }
}

fn main() -> icd_notes::Result<()> {
    for variant in Variant::ALL.into_iter().filter(|v| v.is_neural()) {
        let config = ModelConfig {
            variant,
            vocab_size: 12,
            num_classes: 4,
            embedding_dim: 6,
            cnn_window_sizes: vec![2, 3],
            cnn_filters_per_window: 3,
            lstm_hidden_dim: 5,
            attention_dim: 4,
            dropout_rate: 0.0,
            max_len: 16,
            max_sentences: 4,
            max_sentence_len: 6,
            ..Default::default()
        };
        let mut model = Model::new(config, &mut RngState::named(1, Stream::Init))?;
        let x = note(model.config());
        let target = [1.0, 0.0, 1.0, 0.0];
        let (_, grads) = model.loss_and_grads(&x, &target, Mode::Eval)?;
        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        let ids: Vec<_> = model.params().iter().map(|(id, p)| (id, p.value.len())).collect();
        for (id, len) in ids {
            let g = grads.dense(id, len);
            for (i, &gi) in g.iter().enumerate().take(len) {
                let orig = model.params().get(id).value.data()[i];
                model.params_mut().get_mut(id).value.data_mut()[i] = orig + STEP;
                let up = model.loss_and_grads(&x, &target, Mode::Eval)?.0;
                model.params_mut().get_mut(id).value.data_mut()[i] = orig - STEP;
                let down = model.loss_and_grads(&x, &target, Mode::Eval)?.0;
                model.params_mut().get_mut(id).value.data_mut()[i] = orig;
                analytic.push(gi);
                numeric.push((up - down) / (2.0 * STEP));
            }
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = diff / (norm(&analytic) + norm(&numeric)).max(1e-12);
        println!("{:<15} {} parameters, relative error {rel:.2e}", variant.tag(), analytic.len());
    }
    Ok(())
}
