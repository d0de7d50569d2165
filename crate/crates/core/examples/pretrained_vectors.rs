//! Load pretrained word vectors into a model's embedding table.
//!
//! cargo run --example pretrained_vectors

use icd_notes::models::{load_pretrained_vectors, Model, ModelConfig, Variant};
use icd_notes::rng::{RngState, Stream};
use icd_notes::text::{build_vocab, tokenize_note, RawNote};

fn main() -> icd_notes::Result<()> {
    let note = RawNote {
        note_id: "n".into(),
        text: "chest pain with shortness of breath . troponin negative".into(),
        codes: vec![],
    };
    let vocab = build_vocab(&[tokenize_note(&note, 50)], 1)?;
    let dir = std::env::temp_dir().join("icd_notes_vectors");
    std::fs::create_dir_all(&dir).map_err(|e| icd_notes::Error::io(&dir, e))?;
    let path = dir.join("vectors.txt");
    let body = "chest 0.1 0.2 0.3 0.4\npain -0.5 0.5 -0.5 0.5\naspirin 1 1 1 1\n";
    std::fs::write(&path, body).map_err(|e| icd_notes::Error::io(&path, e))?;

    let config = ModelConfig {
        variant: Variant::Cnn,
        vocab_size: vocab.len(),
        num_classes: 3,
        embedding_dim: 4,
        cnn_window_sizes: vec![2],
        cnn_filters_per_window: 2,
        max_len: 16,
        ..Default::default()
    };
    let mut model = Model::new(config, &mut RngState::named(0, Stream::Init))?;
    let table = model.embedding_id();
    let report = load_pretrained_vectors(&path, &vocab, model.params_mut(), table)?;
    println!("vocabulary {} tokens: {} found, {} kept random", vocab.len(), report.hits, report.misses);
    let emb = &model.params().get(table).value;
    for tok in ["chest", "pain", "breath"] {
        println!("{tok:>8}: {:?}", emb.row_slice(vocab.id(tok)));
    }
    Ok(())
}
