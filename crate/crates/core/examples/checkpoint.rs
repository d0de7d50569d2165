//! Save a model's parameters, load them back and confirm identical logits.
//!
//! cargo run --example checkpoint

use icd_notes::models::{Model, ModelConfig, Variant};
use icd_notes::rng::{RngState, Stream};
use icd_notes::tensor::{load_checkpoint, save_checkpoint, CheckpointHeader};
use icd_notes::text::EncodedNote;

fn main() -> icd_notes::Result<()> {
    let config = ModelConfig {
        variant: Variant::LstmAttention,
        vocab_size: 20,
        num_classes: 5,
        embedding_dim: 8,
        lstm_hidden_dim: 6,
        attention_dim: 4,
        max_len: 12,
        ..Default::default()
    };
    let model = Model::new(config.clone(), &mut RngState::named(3, Stream::Init))?;
    let header = CheckpointHeader {
        variant: config.variant.tag().to_owned(),
        config_hash: config.config_hash(),
        seed: 3,
    };
    let path = std::env::temp_dir().join("icd_notes_example.ckpt");
    save_checkpoint(&path, &header, model.params())?;
    let (loaded_header, params) = load_checkpoint(&path)?;
    assert_eq!(loaded_header, header);
    let restored = Model::from_params(config, params)?;

    let mut note = EncodedNote::padding("x", 12);
    note.ids[..4].copy_from_slice(&[4, 9, 3, 17]);
    note.true_length = 4;
    let a = model.logits(&note)?;
    let b = restored.logits(&note)?;
    println!("{} parameters, {} bytes on disk", model.num_parameters(), std::fs::metadata(&path).map_or(0, |m| m.len()));
    println!("logits match bitwise: {}", a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    Ok(())
}
