//! Parse ICD-9 codes and map them onto chapter and top-k label spaces.
//!
//! cargo run --example icd_labels [code ...]

use icd_notes::icd::{encode_labels, parse_code, parse_codes, top_k_codes, ChapterMapping, LabelSpace};

fn main() -> icd_notes::Result<()> {
    let mut raw: Vec<String> = std::env::args().skip(1).collect();
    if raw.is_empty() {
        raw = ["4019", "428.0", "038.9", "V45.81", "E8798", "7981", "99662"].map(String::from).to_vec();
    }
    let mapping = ChapterMapping::default();
    for r in &raw {
        let code = parse_code(r)?;
        let chapter = mapping
            .chapter_of(&code)
            .and_then(|id| mapping.table.chapter(id))
            .map_or("-".to_owned(), |c| c.range_label());
        println!("{r:>8} -> {:<8} {:?} chapter {chapter}", code.as_str(), code.kind());
    }
    let codes = parse_codes(&raw)?;
    let level1 = LabelSpace::level1(mapping);
    let y = encode_labels(&codes, &level1);
    let active: Vec<&str> = y.active().map(|i| level1.classes()[i].as_str()).collect();
    println!("level1 vector {:?} active {active:?}", y.0);
    let top = top_k_codes(&[codes.clone(), codes[..2].to_vec()], 3)?;
    println!("top-3 space {:?}", top.classes());
    Ok(())
}
