//! ICD-9 code parsing, chapter mapping and label spaces.

mod chapters;
mod code;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use chapters::{Chapter, ChapterMapping, ChapterTable, DEFAULT_CHAPTERS_CSV, NUM_CHAPTERS};
pub use code::{parse_code, CodeKind, IcdCode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelMode {
    /// One class per depth-1 chapter.
    #[serde(rename = "level1")]
    Level1Chapters,
    /// One class per frequent full code.
    #[serde(rename = "topk")]
    TopKCodes,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "level1" => Ok(LabelMode::Level1Chapters),
            "topk" => Ok(LabelMode::TopKCodes),
            other => Err(Error::Config(format!("unknown label mode `{other}` (expected level1 or topk)"))),
        }
    }
}

impl LabelMode {
    pub fn tag(self) -> &'static str {
        match self {
            LabelMode::Level1Chapters => "level1",
            LabelMode::TopKCodes => "topk",
        }
    }
}

/// The class universe a model predicts over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "LabelSpaceRepr", into = "LabelSpaceRepr")]
pub struct LabelSpace {
    mode: LabelMode,
    classes: Vec<String>,
    mapping: Option<ChapterMapping>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct LabelSpaceRepr {
    mode: LabelMode,
    classes: Vec<String>,
    mapping: Option<ChapterMapping>,
}

impl From<LabelSpaceRepr> for LabelSpace {
    fn from(r: LabelSpaceRepr) -> Self {
        LabelSpace::build(r.mode, r.classes, r.mapping)
    }
}

impl From<LabelSpace> for LabelSpaceRepr {
    fn from(s: LabelSpace) -> Self {
        Self {
            mode: s.mode,
            classes: s.classes,
            mapping: s.mapping,
        }
    }
}

impl LabelSpace {
    fn build(mode: LabelMode, classes: Vec<String>, mapping: Option<ChapterMapping>) -> Self {
        let index = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Self {
            mode,
            classes,
            mapping,
            index,
        }
    }

    /// The 17 chapters, in chapter-id order, labelled by root range.
    pub fn level1(mapping: ChapterMapping) -> Self {
        let classes = mapping.table.chapters().iter().map(Chapter::range_label).collect();
        Self::build(LabelMode::Level1Chapters, classes, Some(mapping))
    }

    pub fn top_k(codes: Vec<IcdCode>) -> Self {
        Self::build(
            LabelMode::TopKCodes,
            codes.into_iter().map(|c| c.to_string()).collect(),
            None,
        )
    }

    pub fn mode(&self) -> LabelMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.index.get(class).copied()
    }

    /// Class index a code maps to, if any.
    pub fn class_of(&self, code: &IcdCode) -> Option<usize> {
        match self.mode {
            LabelMode::Level1Chapters => {
                let mapping = self.mapping.as_ref()?;
                mapping.chapter_of(code).map(|id| id as usize - 1)
            }
            LabelMode::TopKCodes => self.index_of(code.as_str()),
        }
    }
}

/// Multi-hot target over a [`LabelSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelVector(pub Vec<u8>);

impl LabelVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_all_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| b as f64).collect()
    }

    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }
}

pub fn encode_labels(codes: &[IcdCode], space: &LabelSpace) -> LabelVector {
    let mut v = LabelVector::zeros(space.len());
    for c in codes {
        if let Some(i) = space.class_of(c) {
            v.0[i] = 1;
        }
    }
    v
}

/// Parses raw code strings, failing on the first malformed one.
pub fn parse_codes(raw: &[String]) -> Result<Vec<IcdCode>> {
    raw.iter().map(|s| parse_code(s)).collect()
}

/// The `k` codes present in the most notes, ties broken by canonical order.
pub fn top_k_codes(corpus: &[Vec<IcdCode>], k: usize) -> Result<LabelSpace> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    let mut counts: HashMap<&IcdCode, usize> = HashMap::new();
    for codes in corpus {
        let mut seen: Vec<&IcdCode> = codes.iter().collect();
        seen.sort();
        seen.dedup();
        for c in seen {
            *counts.entry(c).or_default() += 1;
        }
    }
    if counts.len() < k {
        return Err(Error::Validation(format!(
            "only {} distinct codes, cannot select top {k}",
            counts.len()
        )));
    }
    let mut ranked: Vec<(&IcdCode, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_str().cmp(b.0.as_str())));
    Ok(LabelSpace::top_k(ranked.into_iter().take(k).map(|(c, _)| c.clone()).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationRow {
    pub class: String,
    pub count: usize,
    pub fraction: f64,
}

/// Number and share of notes carrying each class.
pub fn penetration_report(labels: &[LabelVector], space: &LabelSpace) -> Result<Vec<PenetrationRow>> {
    if labels.is_empty() {
        return Err(Error::Validation("penetration report needs a non-empty corpus".into()));
    }
    let n = labels.len() as f64;
    Ok(space
        .classes()
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let count = labels.iter().filter(|l| l.0.get(i) == Some(&1)).count();
            PenetrationRow {
                class: class.clone(),
                count,
                fraction: count as f64 / n,
            }
        })
        .collect())
}

pub fn penetration_csv(rows: &[PenetrationRow]) -> String {
    let mut s = String::from("class,count,fraction\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6}\n", r.class, r.count, r.fraction));
    }
    s
}
