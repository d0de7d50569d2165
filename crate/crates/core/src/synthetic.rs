//! Synthetic discharge notes with labels planted as keywords.
//!
//! Class `i` stands for ICD-9 chapter `i + 1`. A note draws a label set,
//! then each of its classes contributes `keywords_per_class` keywords,
//! each repeated `keyword_repeats` times at random positions among filler
//! words. Every word, planted keywords included, is then swapped for a
//! random noise word with probability `noise_fraction`; at zero noise the
//! label set is exactly the set of classes whose keywords appear.
//!
//! Keywords, filler and noise words are letter-only pseudo-words with
//! disjoint prefixes (`kw`, `fl`, `nz`), so normalization keeps them intact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icd::{ChapterTable, NUM_CHAPTERS};
use crate::rng::{RngState, Stream};
use crate::text::RawNote;

/// Roots never used for generated codes (they are excluded from chapter labels).
const AVOID_ROOTS: [u16; 1] = [798];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_notes: usize,
    pub num_classes: usize,
    pub keywords_per_class: usize,
    pub keyword_repeats: usize,
    /// Inclusive word-count range of a note before sentence punctuation.
    pub min_words: usize,
    pub max_words: usize,
    /// `cardinality_weights[j]` is the relative chance of `j + 1` labels.
    pub cardinality_weights: Vec<f64>,
    /// Class `i` is drawn with weight `1 / (i + 1)^class_skew`.
    pub class_skew: f64,
    pub noise_fraction: f64,
    pub codes_per_class: usize,
    /// Chance that a note also carries a supplementary `V` code.
    pub supplementary_rate: f64,
    pub filler_vocab: usize,
    pub noise_vocab: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_notes: 1000,
            num_classes: 8,
            keywords_per_class: 1,
            keyword_repeats: 3,
            min_words: 40,
            max_words: 160,
            cardinality_weights: vec![0.4, 0.35, 0.25],
            class_skew: 0.5,
            noise_fraction: 0.0,
            codes_per_class: 3,
            supplementary_rate: 0.1,
            filler_vocab: 300,
            noise_vocab: 2000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > NUM_CHAPTERS {
            return Err(Error::Config(format!(
                "num_classes must be in 1..={NUM_CHAPTERS}, got {}",
                self.num_classes
            )));
        }
        let positive = [
            ("num_notes", self.num_notes),
            ("keywords_per_class", self.keywords_per_class),
            ("keyword_repeats", self.keyword_repeats),
            ("min_words", self.min_words),
            ("codes_per_class", self.codes_per_class),
            ("filler_vocab", self.filler_vocab),
            ("noise_vocab", self.noise_vocab),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.min_words > self.max_words {
            return Err(Error::Config("min_words exceeds max_words".into()));
        }
        if self.codes_per_class > 9 {
            return Err(Error::Config("codes_per_class must be <= 9".into()));
        }
        let w = &self.cardinality_weights;
        if w.is_empty() || w.len() > self.num_classes || w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "cardinality_weights must be non-negative, not all zero, and no longer than num_classes".into(),
            ));
        }
        for (name, p) in [("noise_fraction", self.noise_fraction), ("supplementary_rate", self.supplementary_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if !self.class_skew.is_finite() || self.class_skew < 0.0 {
            return Err(Error::Config("class_skew must be >= 0".into()));
        }
        Ok(())
    }

    /// Probability of each label cardinality `1..=len`.
    pub fn cardinality_probabilities(&self) -> Vec<f64> {
        let total: f64 = self.cardinality_weights.iter().sum();
        self.cardinality_weights.iter().map(|w| w / total).collect()
    }
}

/// Letter-only encoding of `n` with a fixed width, `a` = 0.
fn letters(mut n: usize, width: usize) -> String {
    let mut out = vec![b'a'; width];
    for slot in out.iter_mut().rev() {
        *slot = b'a' + (n % 26) as u8;
        n /= 26;
    }
    String::from_utf8(out).expect("ascii")
}

pub fn keyword(class: usize, index: usize) -> String {
    format!("kw{}{}", letters(class, 2), letters(index, 2))
}

fn filler(i: usize) -> String {
    format!("fl{}", letters(i, 3))
}

fn noise(i: usize) -> String {
    format!("nz{}", letters(i, 3))
}

/// Undotted codes for class `i`, spread across its chapter's range.
pub fn class_codes(table: &ChapterTable, class: usize, count: usize) -> Vec<String> {
    let chapter = &table.chapters()[class];
    let span = (chapter.hi - chapter.lo) as usize;
    (0..count)
        .map(|j| {
            let mut root = chapter.lo + (span * (j + 1) / (count + 1)) as u16;
            while AVOID_ROOTS.contains(&root) {
                root -= 1;
            }
            format!("{root:03}{j}")
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<Vec<RawNote>> {
    spec.validate()?;
    let table = ChapterTable::default();
    let mut rng = RngState::named(spec.seed, Stream::Synthesis);
    let codes: Vec<Vec<String>> = (0..spec.num_classes)
        .map(|c| class_codes(&table, c, spec.codes_per_class))
        .collect();
    let class_weights: Vec<f64> = (0..spec.num_classes)
        .map(|i| 1.0 / ((i + 1) as f64).powf(spec.class_skew))
        .collect();
    let width = (spec.num_notes.max(2) as f64).log10().ceil() as usize;
    let mut notes = Vec::with_capacity(spec.num_notes);
    for n in 0..spec.num_notes {
        let cardinality = rng.weighted(&spec.cardinality_weights) + 1;
        let mut weights = class_weights.clone();
        let mut classes = Vec::with_capacity(cardinality);
        for _ in 0..cardinality {
            let c = rng.weighted(&weights);
            weights[c] = 0.0;
            classes.push(c);
        }
        classes.sort_unstable();

        let planted = cardinality * spec.keywords_per_class * spec.keyword_repeats;
        let len = (spec.min_words + rng.below(spec.max_words - spec.min_words + 1)).max(planted);
        let mut words: Vec<String> = (0..len - planted).map(|_| filler(rng.below(spec.filler_vocab))).collect();
        for &c in &classes {
            for k in 0..spec.keywords_per_class {
                for _ in 0..spec.keyword_repeats {
                    let at = rng.below(words.len() + 1);
                    words.insert(at, keyword(c, k));
                }
            }
        }
        for w in words.iter_mut() {
            if rng.next_f64() < spec.noise_fraction {
                *w = noise(rng.below(spec.noise_vocab));
            }
        }

        let mut text = String::new();
        let mut in_sentence = 0;
        let mut sentence_len = 6 + rng.below(9);
        let mut sentences = 0;
        for w in &words {
            if !text.is_empty() && !text.ends_with('\n') {
                text.push(' ');
            }
            text.push_str(w);
            in_sentence += 1;
            if in_sentence == sentence_len {
                sentences += 1;
                text.push_str(if sentences % 3 == 0 { " .\n" } else { " ." });
                in_sentence = 0;
                sentence_len = 6 + rng.below(9);
            }
        }
        if in_sentence > 0 {
            text.push_str(" .");
        }

        let mut note_codes: Vec<String> = classes
            .iter()
            .map(|&c| codes[c][rng.below(spec.codes_per_class)].clone())
            .collect();
        if rng.next_f64() < spec.supplementary_rate {
            note_codes.push(format!("V{:02}{}", 10 + rng.below(80), rng.below(10)));
        }
        notes.push(RawNote {
            note_id: format!("syn{n:0width$}"),
            text: text.trim_end().to_owned(),
            codes: note_codes,
        });
    }
    Ok(notes)
}
