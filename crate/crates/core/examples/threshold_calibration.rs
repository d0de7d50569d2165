//! Calibrate a decision threshold on validation scores and compare micro-F1
//! across the grid.
//!
//! cargo run --example threshold_calibration

use icd_notes::icd::LabelVector;
use icd_notes::rng::{RngState, Stream};
use icd_notes::train::{binarize, calibrate_threshold, f1_at, micro_f1};

fn main() -> icd_notes::Result<()> {
    let mut rng = RngState::named(0, Stream::Synthesis);
    let (n, c) = (60, 6);
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    for _ in 0..n {
        let y: Vec<u8> = (0..c).map(|_| u8::from(rng.next_f64() < 0.3)).collect();
        // Positives score in [0.35, 0.75), negatives in [0.1, 0.5).
        let s = y.iter().map(|&b| (0.1 + 0.25 * f64::from(b) + 0.4 * rng.next_f64()).min(1.0)).collect();
        labels.push(LabelVector(y));
        scores.push(s);
    }
    for tau in [0.1, 0.3, 0.5, 0.7] {
        println!("tau {tau:.2}: F1 {:.4}", f1_at(&scores, &labels, tau)?);
    }
    let tau = calibrate_threshold(&scores, &labels)?;
    let report = micro_f1(&binarize(&scores, tau), &labels)?.with_context("val", tau);
    print!("{}", report.summary_csv());
    Ok(())
}
