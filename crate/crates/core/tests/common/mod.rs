#![allow(dead_code)]

pub mod golden;

use icd_notes::models::{Mode, Model, ModelConfig, Variant};
use icd_notes::rng::RngState;
use icd_notes::tensor::{Graph, ParamSet, Tensor, Var};
use icd_notes::text::{EncodedNote, PAD};

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, 0 when both vanish.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub const FD_STEP: f64 = 1e-5;

/// Central differences of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Checks `d sum(op(inputs)) / d inputs` against central differences.
/// `op` receives the graph and one leaf per input.
pub fn check_op(inputs: &[Tensor], op: impl Fn(&mut Graph<'_>, &[Var]) -> Var) -> f64 {
    let eval = |vals: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
        let out = op(&mut g, &vars);
        g.value(out).data().iter().sum()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone()).unwrap()).collect();
    let out = op(&mut g, &vars);
    let root = g.sum(out);
    let grads = g.backward(root).unwrap();
    let mut worst: f64 = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        let analytic = grads.wrt(vars[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]);
        let numeric = numeric_grad(t.data(), |probe| {
            let mut vals = inputs.to_vec();
            vals[k] = Tensor::new(t.shape().to_vec(), probe.to_vec()).unwrap();
            eval(&vals)
        });
        worst = worst.max(rel_error(&analytic, &numeric));
    }
    worst
}

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut RngState) -> Tensor {
    icd_notes::tensor::init_uniform(shape, scale, rng)
}

/// Miniature configuration used by the full-model checks.
pub fn mini_config(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        vocab_size: 15,
        num_classes: 5,
        embedding_dim: 8,
        cnn_window_sizes: vec![2, 3],
        cnn_filters_per_window: 4,
        lstm_hidden_dim: 8,
        attention_dim: 4,
        dropout_rate: 0.0,
        max_len: 30,
        max_sentences: 6,
        max_sentence_len: 8,
        ..Default::default()
    }
}

pub fn mini_note(rng: &mut RngState, max_len: usize, vocab: usize) -> EncodedNote {
    let true_length = 6 + rng.below(max_len - 6);
    let mut ids: Vec<usize> = (0..true_length).map(|_| 1 + rng.below(vocab - 1)).collect();
    ids.resize(max_len, PAD);
    let mut spans = Vec::new();
    let mut s = 0;
    while s < true_length {
        let e = (s + 2 + rng.below(6)).min(true_length);
        spans.push((s, e));
        s = e;
    }
    EncodedNote {
        note_id: "mini".into(),
        ids,
        true_length,
        sentence_spans: spans,
        codes: vec![],
    }
}

/// Loss of `model` with parameter values replaced by `params`.
pub fn loss_with(config: &ModelConfig, params: ParamSet, note: &EncodedNote, target: &[f64]) -> f64 {
    let model = Model::from_params(config.clone(), params).unwrap();
    model.loss_and_grads(note, target, Mode::Eval).unwrap().0
}

/// Worst relative error over all parameters of a full-model check.
pub fn model_grad_error(model: &Model, note: &EncodedNote, target: &[f64]) -> f64 {
    let (_, grads) = model.loss_and_grads(note, target, Mode::Eval).unwrap();
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (id, p) in model.params().iter() {
        let len = p.value.len();
        analytic.extend(grads.dense(id, len));
        numeric.extend(numeric_grad(p.value.data(), |probe| {
            let mut ps = model.params().clone();
            ps.get_mut(id).value.data_mut().copy_from_slice(probe);
            loss_with(model.config(), ps, note, target)
        }));
    }
    rel_error(&analytic, &numeric)
}

/// Full-model check at `seed`, with weights drawn from U(±0.5) so that
/// gradients are not vanishingly small. The padding row stays zero.
pub fn variant_grad_error(cfg: ModelConfig, seed: u64) -> f64 {
    let mut rng = RngState::new(seed);
    let mut model = Model::new(cfg.clone(), &mut rng).unwrap();
    let ids: Vec<_> = model.params().iter().map(|(id, _)| id).collect();
    for id in ids {
        for x in model.params_mut().get_mut(id).value.data_mut() {
            *x = rng.uniform(-0.5, 0.5);
        }
    }
    let emb = model.embedding_id();
    model.params_mut().get_mut(emb).value.data_mut()[..cfg.embedding_dim].fill(0.0);
    let note = mini_note(&mut rng, cfg.max_len, cfg.vocab_size);
    let target: Vec<f64> = (0..cfg.num_classes).map(|_| rng.below(2) as f64).collect();
    model_grad_error(&model, &note, &target)
}
