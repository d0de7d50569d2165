//! Checks against the committed fixtures in `tests/fixtures`. Each function
//! returns the list of mismatches, empty on success.

use icd_notes::icd::{encode_labels, parse_code, parse_codes, ChapterMapping, CodeKind, LabelSpace};
use icd_notes::text::{encode_pad_with, normalize_text, tokenize, tokenize_note, RawNote, TokenizedNote, Truncation, Vocabulary};
use serde_json::Value;

const TOKENIZER: &str = include_str!("../fixtures/tokenizer.json");
const SENTENCES: &str = include_str!("../fixtures/sentences.json");
const PADDING: &str = include_str!("../fixtures/padding.json");
const CODES: &str = include_str!("../fixtures/codes.json");
const CHAPTERS: &str = include_str!("../fixtures/chapters.json");

fn json(text: &str) -> Value {
    serde_json::from_str(text).expect("fixture is valid JSON")
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect()
}

fn spans(v: &Value) -> Vec<(usize, usize)> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap() as usize, p[1].as_u64().unwrap() as usize))
        .collect()
}

fn note(text: &str) -> RawNote {
    RawNote {
        note_id: "g".into(),
        text: text.into(),
        codes: vec![],
    }
}

pub fn tokenizer() -> Vec<String> {
    let mut bad = Vec::new();
    for case in json(TOKENIZER).as_array().unwrap() {
        let text = case["text"].as_str().unwrap();
        let normalized = normalize_text(text);
        if normalized != case["normalized"].as_str().unwrap() {
            bad.push(format!("normalize {text:?} gave {normalized:?}"));
        }
        let tokens = tokenize(&normalized);
        if tokens != strings(&case["tokens"]) {
            bad.push(format!("tokenize {text:?} gave {tokens:?}"));
        }
        if normalize_text(&normalized) != normalized {
            bad.push(format!("normalize not idempotent on {text:?}"));
        }
    }
    bad
}

pub fn sentences() -> Vec<String> {
    let mut bad = Vec::new();
    for case in json(SENTENCES).as_array().unwrap() {
        let text = case["text"].as_str().unwrap();
        let max = case["max_sentence_len"].as_u64().unwrap() as usize;
        let got = tokenize_note(&note(text), max).sentence_spans;
        if got != spans(&case["spans"]) {
            bad.push(format!("sentences of {text:?} (max {max}) gave {got:?}"));
        }
    }
    bad
}

pub fn padding() -> Vec<String> {
    let fx = json(PADDING);
    let vocab = Vocabulary::from_token_list(strings(&fx["vocab"])).unwrap();
    let mut bad = Vec::new();
    for case in fx["cases"].as_array().unwrap() {
        let tok = TokenizedNote {
            note_id: "g".into(),
            tokens: strings(&case["tokens"]),
            sentence_spans: spans(&case["spans"]),
            codes: vec![],
        };
        let truncation = match case["truncation"].as_str().unwrap() {
            "head" => Truncation::Head,
            _ => Truncation::Tail,
        };
        let max_len = case["max_len"].as_u64().unwrap() as usize;
        let enc = encode_pad_with(&tok, &vocab, max_len, truncation).unwrap();
        let ids: Vec<usize> = case["ids"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        if enc.ids != ids
            || enc.true_length != case["true_length"].as_u64().unwrap() as usize
            || enc.sentence_spans != spans(&case["out_spans"])
        {
            bad.push(format!(
                "pad {:?} to {max_len} ({truncation:?}) gave {:?} len {} spans {:?}",
                tok.tokens, enc.ids, enc.true_length, enc.sentence_spans
            ));
        }
    }
    bad
}

pub fn codes() -> Vec<String> {
    let fx = json(CODES);
    let mut bad = Vec::new();
    for case in fx["valid"].as_array().unwrap() {
        let raw = case["raw"].as_str().unwrap();
        let kind = match case["kind"].as_str().unwrap() {
            "numeric" => CodeKind::Numeric,
            "v" => CodeKind::V,
            _ => CodeKind::E,
        };
        match parse_code(raw) {
            Ok(c) if c.as_str() == case["canonical"].as_str().unwrap() && c.kind() == kind => {}
            other => bad.push(format!("parse {raw:?} gave {other:?}")),
        }
    }
    for raw in strings(&fx["invalid"]) {
        if let Ok(c) = parse_code(&raw) {
            bad.push(format!("parse {raw:?} accepted as {c}"));
        }
    }
    bad
}

pub fn chapters() -> Vec<String> {
    let fx = json(CHAPTERS);
    let mapping = ChapterMapping::default();
    let mut bad = Vec::new();
    for case in fx["codes"].as_array().unwrap() {
        let raw = case["code"].as_str().unwrap();
        let code = parse_code(raw).unwrap();
        let got = mapping
            .chapter_of(&code)
            .and_then(|id| mapping.table.chapter(id))
            .map(|c| c.range_label());
        if got.as_deref() != case["chapter"].as_str() {
            bad.push(format!("chapter of {raw} gave {got:?}"));
        }
    }
    let space = LabelSpace::level1(mapping);
    for case in fx["notes"].as_array().unwrap() {
        let codes = parse_codes(&strings(&case["codes"])).unwrap();
        let y = encode_labels(&codes, &space);
        let got: Vec<String> = y.active().map(|i| space.classes()[i].clone()).collect();
        if got != strings(&case["classes"]) {
            bad.push(format!("labels of {:?} gave {got:?}", case["codes"]));
        }
    }
    bad
}

pub fn all() -> Vec<(&'static str, Vec<String>)> {
    vec![
        ("tokenizer", tokenizer()),
        ("sentences", sentences()),
        ("padding", padding()),
        ("codes", codes()),
        ("chapters", chapters()),
    ]
}
