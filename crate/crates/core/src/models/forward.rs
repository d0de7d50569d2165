//! Variant forward passes. Padding never reaches a prediction: the CNN
//! pools only over windows that start inside the real text, recurrent
//! models stop at the last real token, and attention masks the rest.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Var};
use crate::text::EncodedNote;

use super::{AttentionSite, ForwardOutput, Layout, Mode, Model};

pub(super) fn run<'p>(model: &'p Model, g: &mut Graph<'p>, note: &EncodedNote, mode: Mode<'_>) -> Result<ForwardOutput> {
    let mut attention = Vec::new();
    let features = match &model.layout {
        Layout::Cnn { convs, attention: attn } => {
            let max_k = model.config.max_window();
            // The prefix must hold at least one window of the widest filter.
            let len = note.true_length.max(max_k);
            let x = g.gather(&model.params, model.embedding, &note.ids[..len])?;
            let mut pooled = Vec::with_capacity(convs.len());
            for (i, &(k, filters, bias)) in convs.iter().enumerate() {
                let f = g.param(&model.params, filters)?;
                let b = g.param(&model.params, bias)?;
                let conv = g.conv1d_windows(x, f, b, k)?;
                let conv = g.relu(conv);
                let positions = len - k + 1;
                let valid = note.true_length.max(k) - k + 1;
                let p = match attn {
                    Some(sets) => {
                        let (ctx, weights) = sets[i].pool(g, &model.params, conv, valid)?;
                        attention.push((format!("conv{k}"), AttentionSite { weights, valid }));
                        ctx
                    }
                    None => {
                        let rows = if valid < positions {
                            g.slice_rows(conv, 0, valid)?
                        } else {
                            conv
                        };
                        g.max_over_time(rows)?
                    }
                };
                pooled.push(p);
            }
            g.concat_cols(&pooled)?
        }
        Layout::Rnn { rnn, attention: attn } => {
            let len = note.true_length.max(1);
            let x = g.gather(&model.params, model.embedding, &note.ids[..len])?;
            let states = rnn.run(g, &model.params, x)?;
            match attn {
                Some(a) => {
                    let h = g.stack_rows(&states)?;
                    let (ctx, weights) = a.pool(g, &model.params, h, len)?;
                    attention.push(("words".to_string(), AttentionSite { weights, valid: len }));
                    ctx
                }
                None => states[len - 1],
            }
        }
        Layout::Han {
            word_rnn,
            word_attn,
            sent_rnn,
            sent_attn,
        } => {
            let spans = sentence_windows(note, model.config.max_sentences, model.config.max_sentence_len)?;
            let mut sentences: Vec<Var> = Vec::with_capacity(spans.len());
            for (i, &(s, e)) in spans.iter().enumerate() {
                let x = g.gather(&model.params, model.embedding, &note.ids[s..e])?;
                let states = word_rnn.run(g, &model.params, x)?;
                let h = g.stack_rows(&states)?;
                let (ctx, weights) = word_attn.pool(g, &model.params, h, e - s)?;
                attention.push((format!("sentence{i}.words"), AttentionSite { weights, valid: e - s }));
                sentences.push(ctx);
            }
            let x = g.stack_rows(&sentences)?;
            let states = sent_rnn.run(g, &model.params, x)?;
            let h = g.stack_rows(&states)?;
            let (doc, weights) = sent_attn.pool(g, &model.params, h, spans.len())?;
            attention.push((
                "sentences".to_string(),
                AttentionSite {
                    weights,
                    valid: spans.len(),
                },
            ));
            doc
        }
    };
    let logits = model.dense_head(g, features, mode)?;
    Ok(ForwardOutput { logits, attention })
}

/// The first `max_sentences` non-empty spans, each cut to `max_sentence_len`.
pub(crate) fn sentence_windows(
    note: &EncodedNote,
    max_sentences: usize,
    max_sentence_len: usize,
) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for &(s, e) in &note.sentence_spans {
        if s >= e {
            continue;
        }
        if e > note.ids.len() {
            return Err(Error::Index {
                index: e,
                size: note.ids.len(),
            });
        }
        out.push((s, e.min(s + max_sentence_len)));
        if out.len() == max_sentences {
            break;
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("hierarchical attention (note has no sentences)"));
    }
    Ok(out)
}
