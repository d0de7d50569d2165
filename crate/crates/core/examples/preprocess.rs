//! Normalize, tokenize, split into sentences and pad one note.
//!
//! cargo run --example preprocess ["note text"]

use icd_notes::text::{build_vocab, encode_pad, normalize_text, tokenize_note, RawNote};

fn main() -> icd_notes::Result<()> {
    let text = std::env::args().nth(1).unwrap_or_else(|| {
        "Pt's BP was 120/80 on admission.\nStarted on lasix 40mg. Follow-up in 2 weeks".to_owned()
    });
    println!("normalized: {:?}", normalize_text(&text));
    let note = RawNote {
        note_id: "n1".into(),
        text,
        codes: vec![],
    };
    let tok = tokenize_note(&note, 50);
    for (s, e) in &tok.sentence_spans {
        println!("sentence: {}", tok.tokens[*s..*e].join(" "));
    }
    let vocab = build_vocab(std::slice::from_ref(&tok), 1)?;
    let enc = encode_pad(&tok, &vocab, 24)?;
    println!("ids ({} real): {:?}", enc.true_length, enc.ids);
    println!("decoded: {:?}", vocab.decode(&enc.ids));
    Ok(())
}
