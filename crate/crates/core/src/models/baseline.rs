//! Constant predictor: the most frequent classes of the training split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icd::LabelVector;

/// How many classes the baseline predicts for every note.
pub const BASELINE_TOP: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselinePredictor {
    num_classes: usize,
    classes: Vec<usize>,
}

impl BaselinePredictor {
    /// Picks the `min(4, C)` most frequent classes; ties go to the lower index.
    pub fn fit(train_labels: &[LabelVector], num_classes: usize) -> Result<Self> {
        if train_labels.is_empty() {
            return Err(Error::EmptyInput("baseline training labels"));
        }
        let mut counts = vec![0usize; num_classes];
        for y in train_labels {
            if y.len() != num_classes {
                return Err(Error::Shape {
                    op: "baseline fit",
                    lhs: vec![y.len()],
                    rhs: vec![num_classes],
                });
            }
            for c in y.active() {
                counts[c] += 1;
            }
        }
        let mut order: Vec<usize> = (0..num_classes).collect();
        order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
        order.truncate(BASELINE_TOP.min(num_classes));
        order.sort_unstable();
        Ok(Self {
            num_classes,
            classes: order,
        })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn predict(&self) -> LabelVector {
        let mut y = LabelVector::zeros(self.num_classes);
        for &c in &self.classes {
            y.0[c] = 1;
        }
        y
    }

    /// Scores in {0, 1}, usable wherever model probabilities are expected.
    pub fn scores(&self) -> Vec<f64> {
        self.predict().as_f64()
    }
}
