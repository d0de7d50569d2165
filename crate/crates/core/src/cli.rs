//! The `icd-notes` command line. Exit codes: 0 success, 1 invalid input
//! (bad flags, config, or data), 2 runtime failure.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_corpus, read_corpus, write_jsonl, CorpusSummary};
use crate::error::{Error, Result};
use crate::icd::{encode_labels, parse_codes, penetration_csv, penetration_report, top_k_codes, LabelMode, LabelSpace};
use crate::models::{BaselinePredictor, Model, ModelConfig, RecurrentCell, Variant};
use crate::synthetic::{generate, SyntheticSpec};
use crate::tensor::{load_checkpoint, save_checkpoint, CheckpointHeader};
use crate::text::{build_vocab, corpus_length_stats, tokenize_note, PreprocessConfig, RawNote, TokenizedNote, Vocabulary};
use crate::train::{
    binarize, history_csv, make_examples, micro_f1, prepare, results_csv, run_experiment, run_variant, sample_records,
    split_indices, targets, DataConfig, Example, Manifest, ResultRow, SplitSpec, TrainConfig, RESULTS_HEADER,
};

#[derive(Debug, Parser)]
#[command(name = "icd-notes", version, about = "ICD-9 classification of discharge notes")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a corpus and write it normalized as JSON lines.
    Ingest(IngestArgs),
    /// Token-length statistics and label penetration of a corpus.
    Stats(StatsArgs),
    /// Build a vocabulary file from a corpus.
    BuildVocab(BuildVocabArgs),
    /// Train one model variant and save a run directory.
    Train(TrainArgs),
    /// Score a saved run on a corpus partition.
    Evaluate(EvaluateArgs),
    /// Write predicted codes for every note of a corpus.
    Predict(PredictArgs),
    /// Generate a synthetic corpus with planted labels.
    GenSynthetic(GenSyntheticArgs),
    /// Collect results tables and corpus summaries into plot-ready CSVs.
    Report(ReportArgs),
    /// Run every variant of an experiment manifest.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input corpus: JSON lines, or CSV `note_id,text,codes` when the name ends in .csv.
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON-lines file.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus to summarize (JSON lines or .csv).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Write the `length_bucket,count` histogram here.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Histogram bucket width in tokens.
    #[arg(long, default_value_t = 100)]
    pub bucket_width: usize,
    /// Write the `class,count,fraction` penetration table here.
    #[arg(long)]
    pub penetration: Option<PathBuf>,
    /// Label space for the penetration table: level1 or topk.
    #[arg(long, default_value = "level1")]
    pub label_mode: LabelMode,
    /// Number of codes in the topk label space.
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    /// Corpus to read tokens from.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output file, one token per line.
    #[arg(long)]
    pub output: PathBuf,
    /// Drop tokens seen fewer times than this.
    #[arg(long, default_value_t = 1)]
    pub min_frequency: usize,
}

/// Configuration of a single training run. Every field has a default;
/// a TOML file may set any of them and command-line flags win over both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub variant: Variant,
    pub label_mode: LabelMode,
    pub top_k: usize,
    pub max_records: Option<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub excluded_roots: Option<Vec<u16>>,
    pub pretrained_vectors: Option<PathBuf>,
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Cnn,
            label_mode: LabelMode::Level1Chapters,
            top_k: 20,
            max_records: None,
            epochs: 5,
            seed: 0,
            excluded_roots: None,
            pretrained_vectors: None,
            preprocess: PreprocessConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus (JSON lines or .csv).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Run directory to create (bundle.json, model.ckpt, history.csv, result.csv, result_val.csv).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// baseline, cnn, cnn_attention, lstm, lstm_attention or hier_attention.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// level1 or topk.
    #[arg(long)]
    pub label_mode: Option<LabelMode>,
    /// Number of codes in the topk label space.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Seeded random subset size.
    #[arg(long)]
    pub max_records: Option<usize>,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Seed for initialization, dropout, shuffling, sampling and the split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Examples per gradient step.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty on weight matrices.
    #[arg(long)]
    pub l2_lambda: Option<f64>,
    /// Dropout rate before the output layer.
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Early-stop after this many epochs without validation improvement.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Keep the final epoch instead of the best-validation epoch.
    #[arg(long)]
    pub fixed_epochs: bool,
    /// Tokens kept per note; longer notes are truncated.
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Drop tokens seen fewer times than this in the training split.
    #[arg(long)]
    pub min_frequency: Option<usize>,
    /// Word embedding width.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Convolution filters per window size.
    #[arg(long)]
    pub filters: Option<usize>,
    /// Recurrent hidden width.
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Attention scorer width.
    #[arg(long)]
    pub attention_dim: Option<usize>,
    /// Recurrent cell: lstm or gru.
    #[arg(long)]
    pub cell: Option<String>,
    /// Pretrained word vectors, `token v1 … vd` per line.
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Corpus holding the partition to score.
    #[arg(long)]
    pub corpus: PathBuf,
    /// train, val, test, or all (the whole file, for an external corpus).
    #[arg(long, default_value = "test")]
    pub partition: String,
    /// Metrics summary CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional per-class counts CSV.
    #[arg(long)]
    pub per_class: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Notes to label; codes may be absent.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON lines `{"note_id", "codes"}`.
    #[arg(long)]
    pub output: PathBuf,
    /// Override the calibrated threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenSyntheticArgs {
    /// Output JSON-lines corpus.
    #[arg(long)]
    pub output: PathBuf,
    /// TOML generator spec; flags override it.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of notes.
    #[arg(long)]
    pub num_notes: Option<usize>,
    /// Number of label classes (at most 17).
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Distinct keywords per class.
    #[arg(long)]
    pub keywords_per_class: Option<usize>,
    /// Times each keyword is planted per label.
    #[arg(long)]
    pub keyword_repeats: Option<usize>,
    /// Minimum words per note.
    #[arg(long)]
    pub min_words: Option<usize>,
    /// Maximum words per note.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Comma-separated relative weights of 1, 2, … labels per note.
    #[arg(long, value_delimiter = ',')]
    pub cardinality_weights: Option<Vec<f64>>,
    /// Class frequency skew; 0 draws classes uniformly.
    #[arg(long)]
    pub class_skew: Option<f64>,
    /// Chance each word is replaced by a noise word.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding results.csv files or train run directories.
    #[arg(long)]
    pub results_dir: PathBuf,
    /// Output directory for results_table.csv (plus penetration.csv and length_histogram.csv with --corpus).
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Corpus for penetration.csv and length_histogram.csv.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Label space for the penetration table: level1 or topk.
    #[arg(long, default_value = "level1")]
    pub label_mode: LabelMode,
    /// Number of codes in the topk label space.
    #[arg(long, default_value_t = 20)]
    pub top_k: usize,
    /// Histogram bucket width in tokens.
    #[arg(long, default_value_t = 100)]
    pub bucket_width: usize,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment manifest (TOML).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Receives results.csv, results_val.csv and history_<variant>.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest(a) => ingest(&a),
        Command::Stats(a) => stats(&a),
        Command::BuildVocab(a) => build_vocab_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::Predict(a) => predict_cmd(&a),
        Command::GenSynthetic(a) => gen_synthetic(&a),
        Command::Report(a) => report(&a),
        Command::Experiment(a) => experiment(&a),
    }
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn tokenize_all(notes: &[RawNote], pre: &PreprocessConfig) -> Vec<TokenizedNote> {
    notes.iter().map(|n| tokenize_note(n, pre.max_sentence_len)).collect()
}

fn label_space_for(notes: &[RawNote], mode: LabelMode, top_k: usize) -> Result<LabelSpace> {
    match mode {
        LabelMode::Level1Chapters => Ok(LabelSpace::level1(Default::default())),
        LabelMode::TopKCodes => {
            let codes = notes.iter().map(|n| parse_codes(&n.codes)).collect::<Result<Vec<_>>>()?;
            top_k_codes(&codes, top_k)
        }
    }
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let notes = normalize_corpus(&read_corpus(&a.input)?)?;
    write_jsonl(&a.output, &notes)?;
    print!("{}", CorpusSummary::of(&notes).render());
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let notes = read_corpus(&a.corpus)?;
    let tokenized = tokenize_all(&notes, &PreprocessConfig::default());
    let lengths: Vec<usize> = tokenized.iter().map(|n| n.tokens.len()).collect();
    let st = corpus_length_stats(&lengths, a.bucket_width)?;
    print!("{}", CorpusSummary::of(&notes).render());
    println!("mean tokens: {:.2}", st.mean);
    println!("max tokens: {}", lengths.iter().max().copied().unwrap_or(0));
    if let Some(p) = &a.histogram {
        write(p, st.to_csv())?;
    }
    if let Some(p) = &a.penetration {
        let space = label_space_for(&notes, a.label_mode, a.top_k)?;
        let labels = notes
            .iter()
            .map(|n| Ok(encode_labels(&parse_codes(&n.codes)?, &space)))
            .collect::<Result<Vec<_>>>()?;
        write(p, penetration_csv(&penetration_report(&labels, &space)?))?;
    }
    Ok(())
}

fn build_vocab_cmd(a: &BuildVocabArgs) -> Result<()> {
    let notes = read_corpus(&a.corpus)?;
    let vocab = build_vocab(&tokenize_all(&notes, &PreprocessConfig::default()), a.min_frequency)?;
    vocab.save(&a.output)?;
    println!("vocabulary: {} tokens", vocab.len());
    Ok(())
}

/// Everything needed to rebuild a trained run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunBundle {
    pub variant: Variant,
    pub model_config: Option<ModelConfig>,
    pub baseline: Option<BaselinePredictor>,
    pub data: DataConfig,
    pub label_space: LabelSpace,
    pub vocab: Vec<String>,
    pub threshold: f64,
    pub seed: u64,
    pub train: TrainConfig,
}

pub const BUNDLE_FILE: &str = "bundle.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

impl TrainArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c: RunConfig = match &self.config {
            Some(p) => read_toml(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag.clone() {
                    c.$($field)+ = v;
                }
            };
        }
        set!(self.variant => variant);
        set!(self.label_mode => label_mode);
        set!(self.top_k => top_k);
        set!(self.epochs => epochs);
        set!(self.seed => seed);
        set!(self.batch_size => train.batch_size);
        set!(self.learning_rate => train.learning_rate);
        set!(self.l2_lambda => train.l2_lambda);
        set!(self.dropout => model.dropout_rate);
        set!(self.max_len => preprocess.max_len);
        set!(self.min_frequency => preprocess.min_frequency);
        set!(self.embedding_dim => model.embedding_dim);
        set!(self.filters => model.cnn_filters_per_window);
        set!(self.hidden_dim => model.lstm_hidden_dim);
        set!(self.attention_dim => model.attention_dim);
        if self.max_records.is_some() {
            c.max_records = self.max_records;
        }
        if self.patience.is_some() {
            c.train.patience = self.patience;
        }
        if self.fixed_epochs {
            c.train.fixed_epochs = true;
        }
        if self.pretrained.is_some() {
            c.pretrained_vectors = self.pretrained.clone();
        }
        if let Some(cell) = &self.cell {
            c.model.rnn_cell = match cell.to_ascii_lowercase().as_str() {
                "lstm" => RecurrentCell::Lstm,
                "gru" => RecurrentCell::Gru,
                other => return Err(Error::Config(format!("unknown cell `{other}` (expected lstm or gru)"))),
            };
        }
        Ok(c)
    }
}

impl RunConfig {
    pub fn manifest(&self, data: &Path) -> Manifest {
        Manifest {
            data: data.to_path_buf(),
            variants: vec![self.variant],
            label_mode: self.label_mode,
            top_k: self.top_k,
            max_records: self.max_records,
            epochs: self.epochs,
            seed: self.seed,
            excluded_roots: self.excluded_roots.clone(),
            chapters_csv: None,
            pretrained_vectors: self.pretrained_vectors.clone(),
            preprocess: self.preprocess.clone(),
            model: self.model.clone(),
            train: self.train.clone(),
            split: self.split,
        }
    }
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let manifest = cfg.manifest(&a.corpus);
    manifest.validate()?;
    let notes = read_corpus(&a.corpus)?;
    let data_cfg = manifest.data_config()?;
    let data = prepare(&notes, &data_cfg)?;
    let run = run_variant(&manifest, &data, cfg.variant)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;

    let model_config = run.model.as_ref().map(|m| m.config().clone());
    let baseline = match cfg.variant {
        Variant::Baseline => Some(BaselinePredictor::fit(&targets(&data.train), data.space.len())?),
        _ => None,
    };
    if let Some(model) = &run.model {
        let header = CheckpointHeader {
            variant: cfg.variant.tag().to_owned(),
            config_hash: model.config().config_hash(),
            seed: cfg.seed,
        };
        save_checkpoint(&a.out_dir.join(CHECKPOINT_FILE), &header, model.params())?;
    }
    let bundle = RunBundle {
        variant: cfg.variant,
        model_config,
        baseline,
        data: data_cfg,
        label_space: data.space.clone(),
        vocab: data.vocab.tokens().to_vec(),
        threshold: run.threshold,
        seed: cfg.seed,
        train: manifest.train_config(),
    };
    write(&a.out_dir.join(BUNDLE_FILE), serde_json::to_string_pretty(&bundle)?)?;
    write(&a.out_dir.join("history.csv"), history_csv(&run.history))?;
    let row = |m: &crate::train::MetricsReport| ResultRow {
        variant: cfg.variant,
        label_mode: cfg.label_mode,
        records: data.records,
        epochs: cfg.epochs,
        outcome: Ok((run.threshold, m.precision, m.recall, m.f1)),
    };
    write(&a.out_dir.join("result.csv"), results_csv(&[row(&run.test)]))?;
    write(&a.out_dir.join("result_val.csv"), results_csv(&[row(&run.val)]))?;
    println!(
        "{}: threshold {:.2}, val F1 {:.4}, test F1 {:.4}",
        cfg.variant, run.threshold, run.val.f1, run.test.f1
    );
    Ok(())
}

/// A loaded run: either a neural model or the constant baseline.
pub enum Scorer {
    Neural(Box<Model>),
    Baseline(BaselinePredictor),
}

impl Scorer {
    pub fn scores(&self, data: &[Example]) -> Result<Vec<Vec<f64>>> {
        match self {
            Scorer::Neural(m) => crate::train::predict_scores(m, data),
            Scorer::Baseline(b) => Ok(vec![b.scores(); data.len()]),
        }
    }
}

pub fn load_run(dir: &Path) -> Result<(RunBundle, Scorer)> {
    let path = dir.join(BUNDLE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bundle: RunBundle = serde_json::from_str(&text)?;
    let scorer = match (&bundle.model_config, &bundle.baseline) {
        (Some(cfg), _) => {
            let (header, params) = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
            let expected = cfg.config_hash();
            if header.config_hash != expected || header.variant != bundle.variant.tag() {
                return Err(Error::Validation(format!(
                    "checkpoint ({} {:016x}) does not match the run configuration ({} {:016x}); refusing to use it",
                    header.variant,
                    header.config_hash,
                    bundle.variant.tag(),
                    expected
                )));
            }
            Scorer::Neural(Box::new(Model::from_params(cfg.clone(), params)?))
        }
        (None, Some(b)) => Scorer::Baseline(b.clone()),
        (None, None) => return Err(Error::Validation("run bundle has neither model nor baseline".into())),
    };
    Ok((bundle, scorer))
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let (bundle, scorer) = load_run(&a.run)?;
    let notes = read_corpus(&a.corpus)?;
    let notes = match a.partition.as_str() {
        "all" => notes,
        part @ ("train" | "val" | "test") => {
            let sampled = sample_records(&notes, bundle.data.max_records, bundle.data.split.seed);
            let (tr, va, te) = split_indices(sampled.len(), &bundle.data.split)?;
            let ix = match part {
                "train" => tr,
                "val" => va,
                _ => te,
            };
            ix.into_iter().map(|i| sampled[i].clone()).collect()
        }
        other => {
            return Err(Error::Config(format!(
                "unknown partition `{other}` (expected train, val, test or all)"
            )))
        }
    };
    let vocab = Vocabulary::from_token_list(bundle.vocab.clone())?;
    let pre = &bundle.data.preprocess;
    let data = make_examples(&tokenize_all(&notes, pre), &vocab, &bundle.label_space, pre)?;
    let scores = scorer.scores(&data)?;
    let report = micro_f1(&binarize(&scores, bundle.threshold), &targets(&data))?
        .with_context(&a.partition, bundle.threshold);
    write(&a.output, report.summary_csv())?;
    if let Some(p) = &a.per_class {
        write(p, report.per_class_csv(bundle.label_space.classes()))?;
    }
    println!("{} F1 {:.4} (P {:.4}, R {:.4})", a.partition, report.f1, report.precision, report.recall);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub note_id: String,
    pub codes: Vec<String>,
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let (bundle, scorer) = load_run(&a.run)?;
    let tau = a.threshold.unwrap_or(bundle.threshold);
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Config(format!("threshold {tau} outside [0, 1]")));
    }
    let mut notes = read_corpus(&a.input)?;
    // Codes are irrelevant here; drop them so unlabelled notes work.
    notes.iter_mut().for_each(|n| n.codes.clear());
    let vocab = Vocabulary::from_token_list(bundle.vocab.clone())?;
    let pre = &bundle.data.preprocess;
    let data = make_examples(&tokenize_all(&notes, pre), &vocab, &bundle.label_space, pre)?;
    let preds = binarize(&scorer.scores(&data)?, tau);
    let mut out = String::new();
    for (note, y) in notes.iter().zip(preds) {
        let p = Prediction {
            note_id: note.note_id.clone(),
            codes: y.active().map(|c| bundle.label_space.classes()[c].clone()).collect(),
        };
        out.push_str(&serde_json::to_string(&p)?);
        out.push('\n');
    }
    write(&a.output, out)?;
    info!("wrote {} predictions", notes.len());
    Ok(())
}

fn gen_synthetic(a: &GenSyntheticArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &a.spec {
        Some(p) => read_toml(p)?,
        None => SyntheticSpec::default(),
    };
    macro_rules! set {
        ($flag:ident => $field:ident) => {
            if let Some(v) = a.$flag.clone() {
                spec.$field = v;
            }
        };
    }
    set!(num_notes => num_notes);
    set!(num_classes => num_classes);
    set!(keywords_per_class => keywords_per_class);
    set!(keyword_repeats => keyword_repeats);
    set!(min_words => min_words);
    set!(max_words => max_words);
    set!(cardinality_weights => cardinality_weights);
    set!(class_skew => class_skew);
    set!(noise => noise_fraction);
    set!(seed => seed);
    let notes = generate(&spec)?;
    write_jsonl(&a.output, &notes)?;
    print!("{}", CorpusSummary::of(&notes).render());
    Ok(())
}

/// Results files under `dir`: `results.csv` and `result.csv`, at the top
/// level or one directory down, in path order.
fn find_results(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = BTreeSet::new();
    let names = ["results.csv", "result.csv"];
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            for n in names {
                let p = path.join(n);
                if p.is_file() {
                    found.insert(p);
                }
            }
        } else if path.file_name().is_some_and(|f| names.iter().any(|n| f == *n)) {
            found.insert(path);
        }
    }
    Ok(found.into_iter().collect())
}

fn report(a: &ReportArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER)?;
    let mut rows = 0;
    for path in find_results(&a.results_dir)? {
        let mut r = csv::Reader::from_path(&path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != RESULTS_HEADER {
            return Err(Error::Validation(format!("{}: unexpected results header", path.display())));
        }
        for rec in r.records() {
            w.write_record(&rec?)?;
            rows += 1;
        }
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let table = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    write(&a.out_dir.join("results_table.csv"), table)?;
    if let Some(corpus) = &a.corpus {
        let notes = read_corpus(corpus)?;
        let lengths: Vec<usize> = tokenize_all(&notes, &PreprocessConfig::default())
            .iter()
            .map(|n| n.tokens.len())
            .collect();
        write(
            &a.out_dir.join("length_histogram.csv"),
            corpus_length_stats(&lengths, a.bucket_width)?.to_csv(),
        )?;
        let space = label_space_for(&notes, a.label_mode, a.top_k)?;
        let labels = notes
            .iter()
            .map(|n| Ok(encode_labels(&parse_codes(&n.codes)?, &space)))
            .collect::<Result<Vec<_>>>()?;
        write(
            &a.out_dir.join("penetration.csv"),
            penetration_csv(&penetration_report(&labels, &space)?),
        )?;
    }
    println!("results table: {rows} rows");
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let report = run_experiment(&manifest)?;
    report.write(&a.out_dir)?;
    print!("{}", report.test_csv());
    Ok(())
}
