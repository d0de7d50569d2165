//! Manifest-driven experiments: one results row per model variant.
//!
//! Manifest (TOML):
//!
//! ```toml
//! data = "corpus.jsonl"          # relative to the manifest file
//! variants = ["baseline", "cnn", "cnn_attention", "lstm", "lstm_attention", "hier_attention"]
//! label_mode = "level1"           # or "topk"
//! top_k = 20                      # topk mode only
//! max_records = 5000              # optional seeded subset
//! epochs = 5
//! seed = 42
//! excluded_roots = [798]          # optional
//! chapters_csv = "chapters.csv"   # optional replacement chapter table
//! pretrained_vectors = "vec.txt"  # optional `token v1 … vd` file
//!
//! [preprocess]                    # max_len, max_sentence_len, min_frequency, truncation
//! [model]                         # any ModelConfig field except variant/vocab/classes
//! [train]                         # batch_size, learning_rate, l2_lambda, patience, fixed_epochs
//! [split]                         # train_fraction, val_fraction, test_fraction
//! ```
//!
//! Top-level `epochs` and `seed` override the same fields in the tables.
//! The threshold is calibrated on the validation split; rows are reported
//! for both validation and test.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::corpus::read_corpus;
use crate::error::{Error, Result};
use crate::icd::{ChapterMapping, ChapterTable, LabelMode};
use crate::models::{load_pretrained_vectors, BaselinePredictor, Model, ModelConfig, Variant};
use crate::rng::{RngState, Stream};
use crate::text::PreprocessConfig;

use super::data::{prepare, DataConfig, PreparedData};
use super::metrics::{binarize, calibrate_threshold, micro_f1, MetricsReport};
use super::split::SplitSpec;
use super::trainer::{predict_scores, targets, train, EpochRecord, TrainConfig};

pub const RESULTS_HEADER: [&str; 8] = ["variant", "label_mode", "records", "epochs", "threshold", "precision", "recall", "f1"];

fn default_top_k() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub data: PathBuf,
    pub variants: Vec<Variant>,
    pub label_mode: LabelMode,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub max_records: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub excluded_roots: Option<Vec<u16>>,
    #[serde(default)]
    pub chapters_csv: Option<PathBuf>,
    #[serde(default)]
    pub pretrained_vectors: Option<PathBuf>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitSpec,
}

/// Every variant, chapter labels, 5 epochs, seed 0. `data` is empty, which
/// suits [`run_experiment_on`] with notes already in memory.
impl Default for Manifest {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            variants: Variant::ALL.to_vec(),
            label_mode: LabelMode::Level1Chapters,
            top_k: default_top_k(),
            max_records: None,
            epochs: 5,
            seed: 0,
            excluded_roots: None,
            chapters_csv: None,
            pretrained_vectors: None,
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    /// Reads a manifest and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.data = base.join(&m.data);
        m.chapters_csv = m.chapters_csv.map(|p| base.join(p));
        m.pretrained_vectors = m.pretrained_vectors.map(|p| base.join(p));
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("manifest lists no variants".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.max_records == Some(0) {
            return Err(Error::Config("max_records must be >= 1".into()));
        }
        self.train_config().validate()?;
        self.split_spec().validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.seed,
            ..self.split
        }
    }

    pub fn data_config(&self) -> Result<DataConfig> {
        let mut mapping = ChapterMapping::default();
        if let Some(path) = &self.chapters_csv {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            mapping.table = ChapterTable::from_csv(&text)?;
        }
        if let Some(ex) = &self.excluded_roots {
            mapping.excluded_roots = ex.clone();
        }
        Ok(DataConfig {
            label_mode: self.label_mode,
            top_k: self.top_k,
            mapping,
            preprocess: self.preprocess.clone(),
            split: self.split_spec(),
            max_records: self.max_records,
        })
    }

    /// Model configuration for `variant` on prepared data.
    pub fn model_config(&self, variant: Variant, data: &PreparedData) -> ModelConfig {
        ModelConfig {
            variant,
            vocab_size: data.vocab.len(),
            num_classes: data.space.len(),
            max_len: self.preprocess.max_len,
            max_sentence_len: self.model.max_sentence_len.min(self.preprocess.max_sentence_len),
            ..self.model.clone()
        }
    }
}

/// Everything one variant produced.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub variant: Variant,
    pub threshold: f64,
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub history: Vec<EpochRecord>,
    /// `None` for the baseline.
    pub model: Option<Model>,
    pub seconds: f64,
}

/// Trains (or fits) one variant, calibrates on validation, scores both
/// held-out splits. Test data is only read after the threshold is fixed.
pub fn run_variant(manifest: &Manifest, data: &PreparedData, variant: Variant) -> Result<VariantRun> {
    let start = Instant::now();
    let (val_scores, model, history) = match variant {
        Variant::Baseline => {
            let labels = targets(&data.train);
            let baseline = BaselinePredictor::fit(&labels, data.space.len())?;
            (vec![baseline.scores(); data.val.len()], None, Vec::new())
        }
        _ => {
            let cfg = manifest.model_config(variant, data);
            let mut model = Model::new(cfg, &mut RngState::named(manifest.seed, Stream::Init))?;
            if let Some(path) = &manifest.pretrained_vectors {
                let table = model.embedding_id();
                let report = load_pretrained_vectors(path, &data.vocab, model.params_mut(), table)?;
                info!("pretrained vectors: {} hits, {} misses", report.hits, report.misses);
            }
            let outcome = train(&mut model, &data.train, &data.val, &manifest.train_config())?;
            (predict_scores(&model, &data.val)?, Some(model), outcome.history)
        }
    };
    let val_truth = targets(&data.val);
    let threshold = calibrate_threshold(&val_scores, &val_truth)?;
    let val = micro_f1(&binarize(&val_scores, threshold), &val_truth)?.with_context("val", threshold);
    let test_scores = match &model {
        Some(m) => predict_scores(m, &data.test)?,
        None => {
            let baseline = BaselinePredictor::fit(&targets(&data.train), data.space.len())?;
            vec![baseline.scores(); data.test.len()]
        }
    };
    let test = micro_f1(&binarize(&test_scores, threshold), &targets(&data.test))?.with_context("test", threshold);
    Ok(VariantRun {
        variant,
        threshold,
        val,
        test,
        history,
        model,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub variant: Variant,
    pub label_mode: LabelMode,
    pub records: usize,
    pub epochs: usize,
    /// `(threshold, precision, recall, f1)` or the failure message.
    pub outcome: std::result::Result<(f64, f64, f64, f64), String>,
}

impl ResultRow {
    fn fields(&self) -> Vec<String> {
        let mut f = vec![
            self.variant.tag().to_owned(),
            self.label_mode.tag().to_owned(),
            self.records.to_string(),
            self.epochs.to_string(),
        ];
        match &self.outcome {
            Ok((t, p, r, f1)) => {
                f.push(format!("{t:.2}"));
                f.extend([p, r, f1].iter().map(|x| format!("{x:.6}")));
            }
            Err(msg) => {
                f.extend([String::new(), String::new(), String::new()]);
                f.push(format!("failed: {msg}"));
            }
        }
        f
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.fields()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub test_rows: Vec<ResultRow>,
    pub val_rows: Vec<ResultRow>,
    pub runs: Vec<VariantRun>,
}

impl ExperimentReport {
    pub fn test_csv(&self) -> String {
        results_csv(&self.test_rows)
    }

    pub fn val_csv(&self) -> String {
        results_csv(&self.val_rows)
    }

    /// Writes `results.csv` (test), `results_val.csv`, and one
    /// `history_<variant>.csv` per neural variant that finished.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, body: String| {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        put("results.csv", self.test_csv())?;
        put("results_val.csv", self.val_csv())?;
        for run in self.runs.iter().filter(|r| r.model.is_some()) {
            put(&format!("history_{}.csv", run.variant.tag()), super::trainer::history_csv(&run.history))?;
        }
        Ok(())
    }
}

/// Runs every manifest variant on data already in memory. A failing
/// variant yields a `failed: …` row; the others still run.
pub fn run_experiment_on(manifest: &Manifest, notes: &[crate::text::RawNote]) -> Result<ExperimentReport> {
    manifest.validate()?;
    let data = prepare(notes, &manifest.data_config()?)?;
    let mut report = ExperimentReport {
        test_rows: Vec::new(),
        val_rows: Vec::new(),
        runs: Vec::new(),
    };
    for &variant in &manifest.variants {
        let row = |outcome| ResultRow {
            variant,
            label_mode: manifest.label_mode,
            records: data.records,
            epochs: manifest.epochs,
            outcome,
        };
        match run_variant(manifest, &data, variant) {
            Ok(run) => {
                info!(
                    "{variant}: test F1 {:.4} at threshold {:.2} ({:.1}s)",
                    run.test.f1, run.threshold, run.seconds
                );
                let t = run.threshold;
                report.test_rows.push(row(Ok((t, run.test.precision, run.test.recall, run.test.f1))));
                report.val_rows.push(row(Ok((t, run.val.precision, run.val.recall, run.val.f1))));
                report.runs.push(run);
            }
            Err(e) => {
                warn!("{variant} failed: {e}");
                report.test_rows.push(row(Err(e.to_string())));
                report.val_rows.push(row(Err(e.to_string())));
            }
        }
    }
    Ok(report)
}

/// Loads the manifest's corpus and runs it.
pub fn run_experiment(manifest: &Manifest) -> Result<ExperimentReport> {
    let notes = read_corpus(&manifest.data)?;
    run_experiment_on(manifest, &notes)
}
