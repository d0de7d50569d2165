//! Pretrained word vectors in the plain text format `token v1 v2 … vd`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamSet};
use crate::text::{Vocabulary, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PretrainedReport {
    /// Vocabulary entries whose row came from the file.
    pub hits: usize,
    /// Vocabulary entries that kept their initial row. `hits + misses == V`.
    pub misses: usize,
}

/// Overwrites embedding rows of in-vocabulary tokens with the file's
/// vectors. The whole file is parsed before anything is written, so a bad
/// line leaves the table untouched. The padding row is never overwritten;
/// a token listed twice keeps its last vector.
pub fn load_pretrained_vectors(
    path: &Path,
    vocab: &Vocabulary,
    params: &mut ParamSet,
    table: ParamId,
) -> Result<PretrainedReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (rows, width) = params.get(table).value.dims2()?;
    if rows != vocab.len() {
        return Err(Error::Shape {
            op: "pretrained vectors (table rows vs vocabulary)",
            lhs: vec![rows],
            rhs: vec![vocab.len()],
        });
    }
    let mut updates: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("bad float {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != width {
            return Err(Error::Dimension {
                line: line_no,
                expected: width,
                got: values.len(),
            });
        }
        if let Some(id) = vocab.get(token) {
            if id != PAD {
                updates.push((id, values));
            }
        }
    }
    let data = params.get_mut(table).value.data_mut();
    let mut hit: BTreeSet<usize> = BTreeSet::new();
    for (id, values) in updates {
        data[id * width..(id + 1) * width].copy_from_slice(&values);
        hit.insert(id);
    }
    Ok(PretrainedReport {
        hits: hit.len(),
        misses: rows - hit.len(),
    })
}
