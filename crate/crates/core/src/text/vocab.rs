use std::collections::HashMap;
use std::path::Path;

use super::normalize::NUM_MARKER;
use super::TokenizedNote;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const NUM: usize = 2;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token ↔ id map with reserved ids `0 = <pad>`, `1 = <unk>`, `2 = <num>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
    min_frequency: usize,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>, min_frequency: usize) -> Result<Self> {
        if tokens.len() < 3 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN || tokens[NUM] != NUM_MARKER {
            return Err(Error::Validation(
                "vocabulary must start with <pad>, <unk>, <num>".into(),
            ));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            ids,
            min_frequency,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Maps ids back to tokens, stopping at the first padding id.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .take_while(|&&i| i != PAD)
            .map(|&i| self.token(i).unwrap_or(UNK_TOKEN).to_owned())
            .collect()
    }

    /// One token per line, in id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(s.lines().map(str::to_owned).collect(), 1)
    }

    pub fn from_token_list(tokens: Vec<String>) -> Result<Self> {
        Self::from_tokens(tokens, 1)
    }
}

/// Counts tokens across the corpus and keeps those seen at least
/// `min_frequency` times, ordered by descending frequency then token.
pub fn build_vocab(corpus: &[TokenizedNote], min_frequency: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Validation("cannot build a vocabulary from an empty corpus".into()));
    }
    if min_frequency == 0 {
        return Err(Error::Config("min_frequency must be >= 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for note in corpus {
        for t in &note.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let reserved = [PAD_TOKEN, UNK_TOKEN, NUM_MARKER];
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_frequency && !reserved.contains(t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = reserved
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_owned()))
        .collect();
    Vocabulary::from_tokens(tokens, min_frequency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(tokens: &[&str]) -> TokenizedNote {
        TokenizedNote {
            note_id: "n".into(),
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            sentence_spans: vec![],
            codes: vec![],
        }
    }

    #[test]
    fn threshold_drops_rare_tokens() {
        let corpus = vec![note(&["a", "a", "b"]), note(&["a"])];
        let v = build_vocab(&corpus, 2).unwrap();
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "<num>", "a"]);
        let all = build_vocab(&corpus, 1).unwrap();
        assert_eq!(all.len(), 5);
        assert_eq!(all.id("b"), 4);
        assert_eq!(all.id("zzz"), UNK);
    }

    #[test]
    fn order_is_frequency_then_token() {
        let corpus = vec![note(&["c", "b", "b", "a", "a", "<num>", "<num>", "<num>"])];
        let v = build_vocab(&corpus, 1).unwrap();
        assert_eq!(&v.tokens()[3..], &["a", "b", "c"]);
        assert_eq!(v.id("<num>"), NUM);
        assert_eq!(build_vocab(&corpus, 1).unwrap(), v);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(build_vocab(&[], 1).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let v = build_vocab(&[note(&["x", "y", "y"])], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap().tokens(), v.tokens());
    }
}
