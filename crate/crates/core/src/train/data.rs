//! From raw notes to labelled, encoded examples.

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::icd::{encode_labels, parse_codes, top_k_codes, ChapterMapping, LabelMode, LabelSpace};
use crate::rng::{RngState, Stream};
use crate::text::{build_vocab, encode_pad_with, tokenize_note, EncodedNote, PreprocessConfig, RawNote, TokenizedNote, Vocabulary};

use super::split::{split_indices, SplitSpec};
use super::trainer::Example;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub label_mode: LabelMode,
    pub top_k: usize,
    pub mapping: ChapterMapping,
    pub preprocess: PreprocessConfig,
    pub split: SplitSpec,
    pub max_records: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            label_mode: LabelMode::Level1Chapters,
            top_k: 20,
            mapping: ChapterMapping::default(),
            preprocess: PreprocessConfig::default(),
            split: SplitSpec::default(),
            max_records: None,
        }
    }
}

/// Vocabulary and label space (both from the training split only) plus the
/// three encoded partitions.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub vocab: Vocabulary,
    pub space: LabelSpace,
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
    /// Notes used after the record cap.
    pub records: usize,
}

/// A seeded random subset of `cap` notes, kept in corpus order.
pub fn sample_records(notes: &[RawNote], cap: Option<usize>, seed: u64) -> Vec<RawNote> {
    match cap {
        Some(cap) if cap < notes.len() => {
            let mut idx: Vec<usize> = (0..notes.len()).collect();
            RngState::named(seed, Stream::Sample).shuffle(&mut idx);
            idx.truncate(cap);
            idx.sort_unstable();
            idx.into_iter().map(|i| notes[i].clone()).collect()
        }
        _ => notes.to_vec(),
    }
}

/// HAN needs at least one sentence; a note without tokens gets a single
/// one-token sentence over its first padding slot.
pub fn ensure_sentence(note: &mut EncodedNote) {
    if note.sentence_spans.is_empty() {
        note.sentence_spans.push((0, 1));
    }
}

pub fn encode_note(note: &TokenizedNote, vocab: &Vocabulary, pre: &PreprocessConfig) -> Result<EncodedNote> {
    let mut enc = encode_pad_with(note, vocab, pre.max_len, pre.truncation)?;
    ensure_sentence(&mut enc);
    Ok(enc)
}

pub fn make_examples(
    notes: &[TokenizedNote],
    vocab: &Vocabulary,
    space: &LabelSpace,
    pre: &PreprocessConfig,
) -> Result<Vec<Example>> {
    notes
        .iter()
        .map(|n| {
            Ok(Example {
                note: encode_note(n, vocab, pre)?,
                target: encode_labels(&parse_codes(&n.codes)?, space),
            })
        })
        .collect()
}

pub fn prepare(notes: &[RawNote], cfg: &DataConfig) -> Result<PreparedData> {
    let notes = sample_records(notes, cfg.max_records, cfg.split.seed);
    let tokenized: Vec<TokenizedNote> = notes
        .iter()
        .map(|n| tokenize_note(n, cfg.preprocess.max_sentence_len))
        .collect();
    let (tr, va, te) = split_indices(tokenized.len(), &cfg.split)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| tokenized[i].clone()).collect::<Vec<_>>();
    let (train, val, test) = (pick(&tr), pick(&va), pick(&te));
    let vocab = build_vocab(&train, cfg.preprocess.min_frequency)?;
    let space = match cfg.label_mode {
        LabelMode::Level1Chapters => LabelSpace::level1(cfg.mapping.clone()),
        LabelMode::TopKCodes => {
            let codes = train.iter().map(|n| parse_codes(&n.codes)).collect::<Result<Vec<_>>>()?;
            top_k_codes(&codes, cfg.top_k)?
        }
    };
    let train = make_examples(&train, &vocab, &space, &cfg.preprocess)?;
    let val = make_examples(&val, &vocab, &space, &cfg.preprocess)?;
    let test = make_examples(&test, &vocab, &space, &cfg.preprocess)?;
    let unlabelled = train.iter().filter(|e| e.target.is_all_zero()).count();
    info!(
        "prepared {} notes ({} train, {} val, {} test), vocab {}, {} classes, {unlabelled} training notes without labels",
        notes.len(),
        train.len(),
        val.len(),
        test.len(),
        vocab.len(),
        space.len()
    );
    Ok(PreparedData {
        vocab,
        space,
        train,
        val,
        test,
        records: notes.len(),
    })
}
