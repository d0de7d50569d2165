//! Feed-forward attention pooling.
//!
//! For hidden states `h_t` (rows of `H`), scores are
//! `e_t = vᵀ tanh(W h_t + b)`, weights `α = softmax(e)` over the valid
//! prefix, and the pooled vector is `Σ_t α_t h_t`.

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::{init_uniform, Graph, ParamId, ParamKind, ParamSet, Tensor, Var};

use super::INIT_SCALE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionParams {
    pub w: ParamId,
    pub b: ParamId,
    pub v: ParamId,
}

impl AttentionParams {
    pub fn init(params: &mut ParamSet, prefix: &str, d_in: usize, d_att: usize, rng: &mut RngState) -> Result<Self> {
        Ok(Self {
            w: params.add(
                format!("{prefix}.w"),
                ParamKind::Weight,
                init_uniform(&[d_in, d_att], INIT_SCALE, rng),
            )?,
            b: params.add(format!("{prefix}.b"), ParamKind::Bias, Tensor::zeros(&[1, d_att]))?,
            v: params.add(
                format!("{prefix}.v"),
                ParamKind::Weight,
                init_uniform(&[d_att, 1], INIT_SCALE, rng),
            )?,
        })
    }

    pub fn resolve(params: &ParamSet, prefix: &str) -> Result<Self> {
        Ok(Self {
            w: super::lookup(params, &format!("{prefix}.w"))?,
            b: super::lookup(params, &format!("{prefix}.b"))?,
            v: super::lookup(params, &format!("{prefix}.v"))?,
        })
    }

    pub fn pool<'p>(&self, g: &mut Graph<'p>, params: &'p ParamSet, h: Var, valid: usize) -> Result<(Var, Var)> {
        let w = g.param(params, self.w)?;
        let b = g.param(params, self.b)?;
        let v = g.param(params, self.v)?;
        attention_pool(g, h, w, b, v, valid)
    }
}

/// Pools `h[T×d]` into `(context[1×d], weights[1×T])`. Positions at or past
/// `valid` get weight exactly zero.
pub fn attention_pool(g: &mut Graph<'_>, h: Var, w: Var, b: Var, v: Var, valid: usize) -> Result<(Var, Var)> {
    let t = g.value(h).shape()[0];
    if valid == 0 {
        return Err(Error::EmptyInput("attention_pool (no valid positions)"));
    }
    if valid > t {
        return Err(Error::Index { index: valid, size: t });
    }
    let hidden = g.affine(h, w, b)?;
    let u = g.tanh(hidden);
    let scores = g.matmul(u, v)?;
    let scores = g.transpose(scores);
    let weights = g.masked_softmax(scores, valid)?;
    let context = g.matmul(weights, h)?;
    Ok((context, weights))
}
