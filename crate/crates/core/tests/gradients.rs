//! Finite-difference checks for every graph op and every model variant.

mod common;

use common::*;
use icd_notes::models::{attention_pool, Variant};
use icd_notes::rng::RngState;
use icd_notes::tensor::{Graph, Tensor, Var};

const TOL: f64 = 1e-4;
const INSTANCES: u64 = 20;

fn each_seed(mut f: impl FnMut(&mut RngState) -> f64) {
    for seed in 0..INSTANCES {
        let mut rng = RngState::new(1000 + seed);
        let err = f(&mut rng);
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn matmul_grad() {
    each_seed(|rng| {
        let a = random_tensor(&[3, 4], 1.0, rng);
        let b = random_tensor(&[4, 2], 1.0, rng);
        check_op(&[a, b], |g, v| g.matmul(v[0], v[1]).unwrap())
    });
}

#[test]
fn elementwise_grads() {
    each_seed(|rng| {
        let x = random_tensor(&[3, 5], 2.0, rng);
        let e1 = check_op(std::slice::from_ref(&x), |g, v| g.tanh(v[0]));
        let e2 = check_op(std::slice::from_ref(&x), |g, v| g.sigmoid(v[0]));
        // Keep relu inputs away from the kink.
        let shifted: Vec<f64> = x.data().iter().map(|v| if v.abs() < 0.05 { v + 0.1 } else { *v }).collect();
        let xr = Tensor::new(vec![3, 5], shifted).unwrap();
        let e3 = check_op(&[xr], |g, v| g.relu(v[0]));
        e1.max(e2).max(e3)
    });
}

#[test]
fn arithmetic_grads() {
    each_seed(|rng| {
        let a = random_tensor(&[2, 3], 1.0, rng);
        let b = random_tensor(&[2, 3], 1.0, rng);
        let bias = random_tensor(&[1, 3], 1.0, rng);
        let e1 = check_op(&[a.clone(), b.clone()], |g, v| {
            let s = g.add(v[0], v[1]).unwrap();
            let d = g.sub(s, v[1]).unwrap();
            let m = g.mul(d, v[1]).unwrap();
            g.scale(m, -1.5)
        });
        let e2 = check_op(&[a, bias], |g, v| g.add_row_bias(v[0], v[1]).unwrap());
        e1.max(e2)
    });
}

#[test]
fn softmax_grads() {
    each_seed(|rng| {
        let x = random_tensor(&[2, 5], 2.0, rng);
        let w = random_tensor(&[2, 5], 1.0, rng);
        // Weight the outputs so the sum is not constant.
        let e1 = check_op(&[x.clone(), w.clone()], |g, v| {
            let s = g.softmax_rows(v[0]);
            g.mul(s, v[1]).unwrap()
        });
        let row = random_tensor(&[1, 6], 2.0, rng);
        let wr = random_tensor(&[1, 6], 1.0, rng);
        let e2 = check_op(&[row, wr], |g, v| {
            let s = g.masked_softmax(v[0], 4).unwrap();
            g.mul(s, v[1]).unwrap()
        });
        e1.max(e2)
    });
}

#[test]
fn conv_and_pool_grads() {
    each_seed(|rng| {
        let x = random_tensor(&[7, 3], 1.0, rng);
        let f = random_tensor(&[12, 2], 1.0, rng);
        let b = random_tensor(&[1, 2], 1.0, rng);
        let e1 = check_op(&[x.clone(), f, b], |g, v| g.conv1d_windows(v[0], v[1], v[2], 4).unwrap());
        let e2 = check_op(&[x], |g, v| g.max_over_time(v[0]).unwrap());
        e1.max(e2)
    });
}

#[test]
fn shape_op_grads() {
    each_seed(|rng| {
        let a = random_tensor(&[3, 2], 1.0, rng);
        let b = random_tensor(&[3, 4], 1.0, rng);
        let w = random_tensor(&[6, 3], 1.0, rng);
        check_op(&[a, b, w], |g, v| {
            let c = g.concat_cols(&[v[0], v[1]]).unwrap();
            let t = g.transpose(c);
            let p = g.mul(t, v[2]).unwrap();
            let top = g.slice_rows(p, 1, 4).unwrap();
            let left = g.slice_cols(top, 0, 2).unwrap();
            let s = g.stack_rows(&[left, left]).unwrap();
            let m = g.mean_rows(s);
            let z = g.tanh(m);
            g.sum(z)
        })
    });
}

#[test]
fn loss_and_penalty_grads() {
    each_seed(|rng| {
        let logits = random_tensor(&[2, 3], 3.0, rng);
        let targets = Tensor::new(vec![2, 3], (0..6).map(|_| rng.below(2) as f64).collect()).unwrap();
        let e1 = check_op(&[logits], |g, v| g.multilabel_cross_entropy(v[0], &targets).unwrap());
        let w1 = random_tensor(&[2, 2], 1.0, rng);
        let w2 = random_tensor(&[1, 3], 1.0, rng);
        let e2 = check_op(&[w1, w2], |g, v| g.l2_penalty(&[v[0], v[1]], 0.3).unwrap());
        e1.max(e2)
    });
}

#[test]
fn attention_pool_grad() {
    each_seed(|rng| {
        let h = random_tensor(&[6, 4], 1.0, rng);
        let w = random_tensor(&[4, 3], 1.0, rng);
        let b = random_tensor(&[1, 3], 1.0, rng);
        let v = random_tensor(&[3, 1], 1.0, rng);
        let probe = random_tensor(&[1, 4], 1.0, rng);
        let valid = 1 + rng.below(6);
        check_op(&[h, w, b, v, probe], move |g: &mut Graph<'_>, x: &[Var]| {
            let (ctx, _) = attention_pool(g, x[0], x[1], x[2], x[3], valid).unwrap();
            g.mul(ctx, x[4]).unwrap()
        })
    });
}

fn variant_check(variant: Variant) {
    for seed in 0..10 {
        let err = variant_grad_error(mini_config(variant), seed);
        assert!(err < TOL, "{variant} seed {seed}: relative error {err:e}");
    }
}

#[test]
fn cnn_full_model_grad() {
    variant_check(Variant::Cnn);
}

#[test]
fn cnn_attention_full_model_grad() {
    variant_check(Variant::CnnAttention);
}

#[test]
fn lstm_full_model_grad() {
    variant_check(Variant::Lstm);
}

#[test]
fn lstm_attention_full_model_grad() {
    variant_check(Variant::LstmAttention);
}

#[test]
fn han_full_model_grad() {
    variant_check(Variant::HierAttention);
}

#[test]
fn gru_full_model_grad() {
    for v in [Variant::Lstm, Variant::LstmAttention, Variant::HierAttention] {
        let mut cfg = mini_config(v);
        cfg.rnn_cell = icd_notes::models::RecurrentCell::Gru;
        for seed in 0..3 {
            let err = variant_grad_error(cfg.clone(), seed);
            assert!(err < TOL, "{v} gru seed {seed}: {err:e}");
        }
    }
}
