//! Generate a small synthetic corpus and show how keywords map to labels.
//!
//! cargo run --example gen_synthetic [num_notes] [seed]

use icd_notes::corpus::CorpusSummary;
use icd_notes::synthetic::{generate, keyword, SyntheticSpec};

fn main() -> icd_notes::Result<()> {
    let mut args = std::env::args().skip(1);
    let num_notes = args.next().map_or(200, |s| s.parse().expect("num_notes"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let spec = SyntheticSpec {
        num_notes,
        num_classes: 5,
        seed,
        ..Default::default()
    };
    let notes = generate(&spec)?;
    print!("{}", CorpusSummary::of(&notes).render());
    for c in 0..spec.num_classes {
        println!("class {c}: keyword {}", keyword(c, 0));
    }
    let first = &notes[0];
    println!("\n{} {:?}", first.note_id, first.codes);
    println!("{}", first.text.chars().take(240).collect::<String>());
    Ok(())
}
