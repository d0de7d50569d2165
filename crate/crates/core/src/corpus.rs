//! Corpus files.
//!
//! The native format is JSON lines, one `{"note_id", "text", "codes"}`
//! object per line. A CSV adapter reads `note_id,text,codes` with codes
//! joined by `;` (e.g. `4280;401.9`). Blank lines are skipped.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::icd::parse_code;
use crate::text::{normalize_text, RawNote};

pub fn parse_jsonl(text: &str) -> Result<Vec<RawNote>> {
    let mut notes = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let note: RawNote = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        check_note(&note, i + 1, &mut seen)?;
        notes.push(note);
    }
    non_empty(notes)
}

pub fn parse_csv(text: &str) -> Result<Vec<RawNote>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let want = ["note_id", "text", "codes"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header `note_id,text,codes`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut notes = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let codes = record[2]
            .split(';')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_owned)
            .collect();
        let note = RawNote {
            note_id: record[0].to_owned(),
            text: record[1].to_owned(),
            codes,
        };
        check_note(&note, line, &mut seen)?;
        notes.push(note);
    }
    non_empty(notes)
}

fn check_note(note: &RawNote, line: usize, seen: &mut HashSet<String>) -> Result<()> {
    if note.note_id.trim().is_empty() {
        return Err(Error::Parse {
            line,
            msg: "empty note_id".into(),
        });
    }
    if !seen.insert(note.note_id.clone()) {
        return Err(Error::Parse {
            line,
            msg: format!("duplicate note_id {:?}", note.note_id),
        });
    }
    for code in &note.codes {
        parse_code(code).map_err(|_| Error::Parse {
            line,
            msg: format!("malformed ICD-9 code {code:?}"),
        })?;
    }
    Ok(())
}

fn non_empty(notes: Vec<RawNote>) -> Result<Vec<RawNote>> {
    if notes.is_empty() {
        return Err(Error::Validation("no records".into()));
    }
    Ok(notes)
}

/// Reads a corpus, choosing the CSV adapter for `.csv` files.
pub fn read_corpus(path: &Path) -> Result<Vec<RawNote>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        parse_csv(&text)
    } else {
        parse_jsonl(&text)
    }
}

pub fn to_jsonl(notes: &[RawNote]) -> String {
    let mut out = String::new();
    for n in notes {
        out.push_str(&serde_json::to_string(n).expect("notes serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, notes: &[RawNote]) -> Result<()> {
    std::fs::write(path, to_jsonl(notes)).map_err(|e| Error::io(path, e))
}

/// Normalized text and canonical dotted codes. Input must already be valid.
pub fn normalize_corpus(notes: &[RawNote]) -> Result<Vec<RawNote>> {
    notes
        .iter()
        .map(|n| {
            Ok(RawNote {
                note_id: n.note_id.clone(),
                text: normalize_text(&n.text),
                codes: n
                    .codes
                    .iter()
                    .map(|c| parse_code(c).map(|c| c.to_string()))
                    .collect::<Result<_>>()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSummary {
    pub notes: usize,
    pub codes: usize,
    pub distinct_codes: usize,
}

impl CorpusSummary {
    pub fn of(notes: &[RawNote]) -> Self {
        let distinct: BTreeSet<&str> = notes.iter().flat_map(|n| n.codes.iter().map(String::as_str)).collect();
        Self {
            notes: notes.len(),
            codes: notes.iter().map(|n| n.codes.len()).sum(),
            distinct_codes: distinct.len(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "notes: {}", self.notes);
        let _ = writeln!(s, "codes: {}", self.codes);
        let _ = writeln!(s, "distinct codes: {}", self.distinct_codes);
        s
    }
}
