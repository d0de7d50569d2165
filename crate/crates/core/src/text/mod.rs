//! Raw note text → fixed-length token-id sequences.

mod normalize;
mod vocab;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use normalize::{normalize_text, split_sentences, tokenize, tokenize_with_breaks, NUM_MARKER};
pub use vocab::{build_vocab, Vocabulary, NUM, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_LEN: usize = 5_000;
pub const DEFAULT_MAX_SENTENCE_LEN: usize = 50;

/// A note as it arrives: free text plus its ICD-9 code strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNote {
    pub note_id: String,
    pub text: String,
    #[serde(default)]
    pub codes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedNote {
    pub note_id: String,
    pub tokens: Vec<String>,
    /// Half-open `(start, end)` spans partitioning `tokens`.
    pub sentence_spans: Vec<(usize, usize)>,
    pub codes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Keep the first `max_len` tokens.
    Head,
    /// Keep the last `max_len` tokens.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub max_len: usize,
    pub max_sentence_len: usize,
    pub min_frequency: usize,
    pub truncation: Truncation,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            min_frequency: 1,
            truncation: Truncation::Head,
        }
    }
}

pub fn tokenize_note(note: &RawNote, max_sentence_len: usize) -> TokenizedNote {
    let normalized = normalize_text(&note.text);
    let (tokens, breaks) = tokenize_with_breaks(&normalized);
    let sentence_spans = split_sentences(&tokens, &breaks, max_sentence_len);
    TokenizedNote {
        note_id: note.note_id.clone(),
        tokens,
        sentence_spans,
        codes: note.codes.clone(),
    }
}

/// A note padded or truncated to exactly `max_len` ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedNote {
    pub note_id: String,
    pub ids: Vec<usize>,
    /// Number of real (non-padding) tokens.
    pub true_length: usize,
    pub sentence_spans: Vec<(usize, usize)>,
    pub codes: Vec<String>,
}

impl EncodedNote {
    pub fn max_len(&self) -> usize {
        self.ids.len()
    }

    /// An all-padding note of the given length.
    pub fn padding(note_id: &str, max_len: usize) -> Self {
        Self {
            note_id: note_id.to_owned(),
            ids: vec![PAD; max_len],
            true_length: 0,
            sentence_spans: vec![],
            codes: vec![],
        }
    }
}

pub fn encode_pad(note: &TokenizedNote, vocab: &Vocabulary, max_len: usize) -> Result<EncodedNote> {
    encode_pad_with(note, vocab, max_len, Truncation::Head)
}

pub fn encode_pad_with(
    note: &TokenizedNote,
    vocab: &Vocabulary,
    max_len: usize,
    truncation: Truncation,
) -> Result<EncodedNote> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be >= 1".into()));
    }
    let n = note.tokens.len();
    let keep = n.min(max_len);
    let offset = match truncation {
        Truncation::Head => 0,
        Truncation::Tail => n - keep,
    };
    let mut ids: Vec<usize> = note.tokens[offset..offset + keep]
        .iter()
        .map(|t| vocab.id(t))
        .collect();
    ids.resize(max_len, PAD);
    let sentence_spans = note
        .sentence_spans
        .iter()
        .filter_map(|&(s, e)| {
            let s = s.max(offset) - offset;
            let e = e.min(offset + keep).saturating_sub(offset);
            (s < e).then_some((s, e))
        })
        .collect();
    Ok(EncodedNote {
        note_id: note.note_id.clone(),
        ids,
        true_length: keep,
        sentence_spans,
        codes: note.codes.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub count: usize,
    pub mean: f64,
    pub bucket_width: usize,
    /// Bucket start → number of notes.
    pub buckets: BTreeMap<usize, usize>,
}

impl LengthStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("length_bucket,count\n");
        for (b, c) in &self.buckets {
            s.push_str(&format!("{b},{c}\n"));
        }
        s
    }
}

/// Histogram of token counts per note, bucketed by `bucket_width`.
pub fn corpus_length_stats(lengths: &[usize], bucket_width: usize) -> Result<LengthStats> {
    if lengths.is_empty() {
        return Err(Error::Validation("length statistics need a non-empty corpus".into()));
    }
    let width = bucket_width.max(1);
    let mut buckets = BTreeMap::new();
    for &l in lengths {
        *buckets.entry(l / width * width).or_default() += 1;
    }
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    Ok(LengthStats {
        count: lengths.len(),
        mean,
        bucket_width: width,
        buckets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok_note(tokens: &[&str]) -> TokenizedNote {
        TokenizedNote {
            note_id: "n".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            sentence_spans: vec![(0, tokens.len())],
            codes: vec![],
        }
    }

    #[test]
    fn pad_short_note() {
        let note = tok_note(&["a"]);
        let vocab = build_vocab(std::slice::from_ref(&note), 1).unwrap();
        let enc = encode_pad(&note, &vocab, 3).unwrap();
        assert_eq!(enc.ids, vec![vocab.id("a"), PAD, PAD]);
        assert_eq!(enc.true_length, 1);
    }

    #[test]
    fn truncate_keeps_head() {
        let tokens: Vec<String> = (0..6000).map(|i| format!("t{}", i % 7)).collect();
        let note = TokenizedNote {
            note_id: "n".into(),
            sentence_spans: vec![(0, 4990), (4990, 6000)],
            tokens,
            codes: vec![],
        };
        let vocab = build_vocab(std::slice::from_ref(&note), 1).unwrap();
        let enc = encode_pad(&note, &vocab, 5000).unwrap();
        assert_eq!(enc.ids.len(), 5000);
        assert_eq!(enc.true_length, 5000);
        assert_eq!(vocab.decode(&enc.ids), note.tokens[..5000].to_vec());
        assert_eq!(enc.sentence_spans, vec![(0, 4990), (4990, 5000)]);

        let tail = encode_pad_with(&note, &vocab, 5000, Truncation::Tail).unwrap();
        assert_eq!(vocab.decode(&tail.ids), note.tokens[1000..].to_vec());
        assert_eq!(tail.sentence_spans, vec![(0, 3990), (3990, 5000)]);
    }

    #[test]
    fn unknown_token_maps_to_unk() {
        let vocab = build_vocab(&[tok_note(&["a"])], 1).unwrap();
        let enc = encode_pad(&tok_note(&["zzz"]), &vocab, 2).unwrap();
        assert_eq!(enc.ids, vec![UNK, PAD]);
    }

    #[test]
    fn length_stats_cases() {
        let s = corpus_length_stats(&[2, 2, 4], 1).unwrap();
        assert!((s.mean - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.buckets, BTreeMap::from([(2, 2), (4, 1)]));
        assert_eq!(s.to_csv(), "length_bucket,count\n2,2\n4,1\n");
        assert!(corpus_length_stats(&[], 1).is_err());
    }

    #[test]
    fn tokenize_note_builds_spans() {
        let raw = RawNote {
            note_id: "x".into(),
            text: "Pt stable. Discharged home\nFollow up".into(),
            codes: vec!["4280".into()],
        };
        let t = tokenize_note(&raw, 50);
        assert_eq!(t.tokens.len(), 7);
        assert_eq!(t.sentence_spans, vec![(0, 3), (3, 5), (5, 7)]);
    }
}
