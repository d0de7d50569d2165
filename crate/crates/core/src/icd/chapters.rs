use serde::{Deserialize, Serialize};

use super::code::{CodeKind, IcdCode};
use crate::error::{Error, Result};

pub const NUM_CHAPTERS: usize = 17;

/// The standard ICD-9-CM chapter list shipped with the crate.
pub const DEFAULT_CHAPTERS_CSV: &str = include_str!("../../data/icd9_chapters.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub chapter_id: u8,
    pub lo: u16,
    pub hi: u16,
    pub name: String,
}

impl Chapter {
    /// Range label such as `390-459`.
    pub fn range_label(&self) -> String {
        format!("{:03}-{:03}", self.lo, self.hi)
    }
}

/// The 17 depth-1 nodes of the numeric ICD-9 tree as inclusive root ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Chapter>", into = "Vec<Chapter>")]
pub struct ChapterTable {
    chapters: Vec<Chapter>,
}

impl TryFrom<Vec<Chapter>> for ChapterTable {
    type Error = Error;

    fn try_from(chapters: Vec<Chapter>) -> Result<Self> {
        ChapterTable::new(chapters)
    }
}

impl From<ChapterTable> for Vec<Chapter> {
    fn from(t: ChapterTable) -> Self {
        t.chapters
    }
}

impl ChapterTable {
    /// Validates that there are exactly 17 chapters whose ranges, in order,
    /// tile `001..=999` without gaps or overlaps.
    pub fn new(mut chapters: Vec<Chapter>) -> Result<Self> {
        if chapters.len() != NUM_CHAPTERS {
            return Err(Error::Validation(format!(
                "chapter table has {} rows, expected {NUM_CHAPTERS}",
                chapters.len()
            )));
        }
        chapters.sort_by_key(|c| c.lo);
        let mut next = 1u16;
        for c in &chapters {
            if c.lo > c.hi {
                return Err(Error::Validation(format!("chapter {} has lo > hi", c.chapter_id)));
            }
            if c.lo != next {
                return Err(Error::Validation(format!(
                    "chapter {} starts at {:03}, expected {next:03} (gap or overlap)",
                    c.chapter_id, c.lo
                )));
            }
            next = c.hi + 1;
        }
        if next != 1000 {
            return Err(Error::Validation(format!("chapter ranges end at {:03}, not 999", next - 1)));
        }
        let mut ids: Vec<u8> = chapters.iter().map(|c| c.chapter_id).collect();
        ids.sort_unstable();
        if ids != (1..=NUM_CHAPTERS as u8).collect::<Vec<_>>() {
            return Err(Error::Validation("chapter ids must be 1..=17".into()));
        }
        chapters.sort_by_key(|c| c.chapter_id);
        Ok(Self { chapters })
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["chapter_id", "lo", "hi", "name"] {
            return Err(Error::Validation(format!(
                "chapter table header must be chapter_id,lo,hi,name, got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = rdr
            .deserialize::<Chapter>()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| Error::Parse {
                    line: i + 2,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn chapters(&self) -> &[Chapter] {
        &self.chapters
    }

    pub fn chapter(&self, id: u8) -> Option<&Chapter> {
        self.chapters.iter().find(|c| c.chapter_id == id)
    }

    pub fn chapter_for_root(&self, root: u16) -> Option<&Chapter> {
        self.chapters.iter().find(|c| (c.lo..=c.hi).contains(&root))
    }
}

impl Default for ChapterTable {
    fn default() -> Self {
        Self::from_csv(DEFAULT_CHAPTERS_CSV).expect("bundled chapter table is valid")
    }
}

/// Chapter table plus the list of numeric roots left out of the chapter space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChapterMapping {
    pub table: ChapterTable,
    pub excluded_roots: Vec<u16>,
}

impl Default for ChapterMapping {
    fn default() -> Self {
        Self {
            table: ChapterTable::default(),
            excluded_roots: vec![798],
        }
    }
}

impl ChapterMapping {
    /// Chapter id for a numeric code; `None` for V/E codes and excluded roots.
    pub fn chapter_of(&self, code: &IcdCode) -> Option<u8> {
        if code.kind() != CodeKind::Numeric {
            return None;
        }
        let root = code.numeric_root()?;
        if self.excluded_roots.contains(&root) {
            return None;
        }
        self.table.chapter_for_root(root).map(|c| c.chapter_id)
    }
}
