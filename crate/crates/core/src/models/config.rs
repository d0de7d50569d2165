use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::recurrent::RecurrentCell;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    Cnn,
    CnnAttention,
    Lstm,
    LstmAttention,
    #[serde(alias = "han")]
    HierAttention,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline,
        Variant::Cnn,
        Variant::CnnAttention,
        Variant::Lstm,
        Variant::LstmAttention,
        Variant::HierAttention,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Cnn => "cnn",
            Variant::CnnAttention => "cnn_attention",
            Variant::Lstm => "lstm",
            Variant::LstmAttention => "lstm_attention",
            Variant::HierAttention => "hier_attention",
        }
    }

    pub fn is_neural(self) -> bool {
        self != Variant::Baseline
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        if s == "han" {
            return Ok(Variant::HierAttention);
        }
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown model variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub num_classes: usize,
    pub embedding_dim: usize,
    pub cnn_window_sizes: Vec<usize>,
    pub cnn_filters_per_window: usize,
    pub lstm_hidden_dim: usize,
    pub attention_dim: usize,
    pub rnn_cell: RecurrentCell,
    pub dropout_rate: f64,
    pub max_len: usize,
    pub max_sentences: usize,
    pub max_sentence_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Cnn,
            vocab_size: 3,
            num_classes: 17,
            embedding_dim: 100,
            cnn_window_sizes: vec![2, 3, 4, 5],
            cnn_filters_per_window: 100,
            lstm_hidden_dim: 128,
            attention_dim: 64,
            rnn_cell: RecurrentCell::Lstm,
            dropout_rate: 0.5,
            max_len: 5000,
            max_sentences: 100,
            max_sentence_len: 50,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("num_classes", self.num_classes),
            ("embedding_dim", self.embedding_dim),
            ("cnn_filters_per_window", self.cnn_filters_per_window),
            ("lstm_hidden_dim", self.lstm_hidden_dim),
            ("attention_dim", self.attention_dim),
            ("max_len", self.max_len),
            ("max_sentences", self.max_sentences),
            ("max_sentence_len", self.max_sentence_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.vocab_size < 3 {
            return Err(Error::Config("vocab_size must cover the reserved ids".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if matches!(self.variant, Variant::Cnn | Variant::CnnAttention) {
            if self.cnn_window_sizes.is_empty() || self.cnn_window_sizes.contains(&0) {
                return Err(Error::Config("cnn_window_sizes must be non-empty and positive".into()));
            }
            let mut sorted = self.cnn_window_sizes.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != self.cnn_window_sizes.len() {
                return Err(Error::Config("cnn_window_sizes must be distinct".into()));
            }
            if self.max_window() > self.max_len {
                return Err(Error::Config(format!(
                    "max_len {} is shorter than the widest window {}",
                    self.max_len,
                    self.max_window()
                )));
            }
        }
        Ok(())
    }

    pub fn max_window(&self) -> usize {
        self.cnn_window_sizes.iter().copied().max().unwrap_or(1)
    }

    /// Width of the vector fed to the output layer.
    pub fn feature_width(&self) -> usize {
        match self.variant {
            Variant::Cnn | Variant::CnnAttention => self.cnn_window_sizes.len() * self.cnn_filters_per_window,
            _ => self.lstm_hidden_dim,
        }
    }

    /// Stable 64-bit digest of the configuration, stored in checkpoints.
    pub fn config_hash(&self) -> u64 {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("HAN".parse::<Variant>().unwrap(), Variant::HierAttention);
        assert!("rnn".parse::<Variant>().is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let c = ModelConfig::default();
        c.validate().unwrap();
        assert_eq!(c.feature_width(), 400);
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = ModelConfig::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.attention_dim += 1;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ModelConfig {
            dropout_rate: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.dropout_rate = 0.0;
        c.max_len = 4;
        assert!(c.validate().is_err());
        c.variant = Variant::Lstm;
        c.validate().unwrap();
    }
}
