//! Run a TOML experiment manifest and write the results tables.
//!
//! cargo run --release --example run_experiment <manifest.toml> <out_dir>
//!
//! Without arguments a small synthetic corpus and manifest are written to a
//! temporary directory first.

use std::path::PathBuf;

use icd_notes::corpus::write_jsonl;
use icd_notes::synthetic::{generate, SyntheticSpec};
use icd_notes::train::{run_experiment, Manifest};

const MANIFEST: &str = r#"
data = "corpus.jsonl"
variants = ["baseline", "cnn", "lstm"]
label_mode = "level1"
epochs = 8
seed = 5

[preprocess]
max_len = 120

[model]
embedding_dim = 16
cnn_filters_per_window = 8
lstm_hidden_dim = 16
dropout_rate = 0.0

[train]
batch_size = 8
learning_rate = 0.02
"#;

fn main() -> icd_notes::Result<()> {
    let mut args = std::env::args().skip(1);
    let (manifest_path, out) = match (args.next(), args.next()) {
        (Some(m), Some(o)) => (PathBuf::from(m), PathBuf::from(o)),
        _ => {
            let dir = std::env::temp_dir().join("icd_notes_experiment");
            std::fs::create_dir_all(&dir).map_err(|e| icd_notes::Error::io(&dir, e))?;
            let spec = SyntheticSpec {
                num_notes: 300,
                max_words: 100,
                seed: 5,
                ..Default::default()
            };
            write_jsonl(&dir.join("corpus.jsonl"), &generate(&spec)?)?;
            let path = dir.join("manifest.toml");
            std::fs::write(&path, MANIFEST).map_err(|e| icd_notes::Error::io(&path, e))?;
            (path, dir.join("results"))
        }
    };
    let manifest = Manifest::load(&manifest_path)?;
    let report = run_experiment(&manifest)?;
    report.write(&out)?;
    println!("validation:\n{}", report.val_csv());
    println!("test:\n{}", report.test_csv());
    println!("written to {}", out.display());
    Ok(())
}
