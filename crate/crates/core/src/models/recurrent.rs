//! Single-layer unidirectional recurrent encoders.
//!
//! LSTM gate layout along the `4h` axis is `[input, forget, cell, output]`;
//! the forget-gate bias starts at +1. GRU layout along `3h` is
//! `[reset, update, candidate]` with `h' = (1 - z) ⊙ n + z ⊙ h`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::RngState;
use crate::tensor::{init_uniform, Graph, ParamId, ParamKind, ParamSet, Tensor, Var};

use super::INIT_SCALE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentCell {
    #[default]
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecurrentParams {
    pub cell: RecurrentCell,
    pub hidden: usize,
    pub wx: ParamId,
    pub wh: ParamId,
    /// GRU only: recurrent weights of the candidate state.
    pub wh_n: Option<ParamId>,
    pub b: ParamId,
}

impl RecurrentParams {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        cell: RecurrentCell,
        d_in: usize,
        hidden: usize,
        rng: &mut RngState,
    ) -> Result<Self> {
        let gates = match cell {
            RecurrentCell::Lstm => 4,
            RecurrentCell::Gru => 3,
        };
        let wx = params.add(
            format!("{prefix}.wx"),
            ParamKind::Weight,
            init_uniform(&[d_in, gates * hidden], INIT_SCALE, rng),
        )?;
        let wh_cols = match cell {
            RecurrentCell::Lstm => 4 * hidden,
            RecurrentCell::Gru => 2 * hidden,
        };
        let wh = params.add(
            format!("{prefix}.wh"),
            ParamKind::Weight,
            init_uniform(&[hidden, wh_cols], INIT_SCALE, rng),
        )?;
        let wh_n = match cell {
            RecurrentCell::Lstm => None,
            RecurrentCell::Gru => Some(params.add(
                format!("{prefix}.wh_n"),
                ParamKind::Weight,
                init_uniform(&[hidden, hidden], INIT_SCALE, rng),
            )?),
        };
        let mut bias = Tensor::zeros(&[1, gates * hidden]);
        if cell == RecurrentCell::Lstm {
            bias.data_mut()[hidden..2 * hidden].fill(1.0);
        }
        let b = params.add(format!("{prefix}.b"), ParamKind::Bias, bias)?;
        Ok(Self {
            cell,
            hidden,
            wx,
            wh,
            wh_n,
            b,
        })
    }

    pub fn resolve(params: &ParamSet, prefix: &str, cell: RecurrentCell, hidden: usize) -> Result<Self> {
        Ok(Self {
            cell,
            hidden,
            wx: super::lookup(params, &format!("{prefix}.wx"))?,
            wh: super::lookup(params, &format!("{prefix}.wh"))?,
            wh_n: match cell {
                RecurrentCell::Lstm => None,
                RecurrentCell::Gru => Some(super::lookup(params, &format!("{prefix}.wh_n"))?),
            },
            b: super::lookup(params, &format!("{prefix}.b"))?,
        })
    }

    /// Runs the cell over every row of `x[T×d]`, returning the `T` hidden
    /// states as `1 × h` rows.
    pub fn run<'p>(&self, g: &mut Graph<'p>, params: &'p ParamSet, x: Var) -> Result<Vec<Var>> {
        let wx = g.param(params, self.wx)?;
        let wh = g.param(params, self.wh)?;
        let b = g.param(params, self.b)?;
        let projected = g.affine(x, wx, b)?;
        let steps = g.value(x).shape()[0];
        match self.cell {
            RecurrentCell::Lstm => self.run_lstm(g, projected, wh, steps),
            RecurrentCell::Gru => {
                let wh_n = g.param(params, self.wh_n.expect("gru has wh_n"))?;
                self.run_gru(g, projected, wh, wh_n, steps)
            }
        }
    }

    fn run_lstm(&self, g: &mut Graph<'_>, projected: Var, wh: Var, steps: usize) -> Result<Vec<Var>> {
        let h = self.hidden;
        let mut states = Vec::with_capacity(steps);
        let mut prev: Option<(Var, Var)> = None;
        for t in 0..steps {
            let mut gates = g.slice_rows(projected, t, t + 1)?;
            if let Some((h_prev, _)) = prev {
                let rec = g.matmul(h_prev, wh)?;
                gates = g.add(gates, rec)?;
            }
            let i = g.slice_cols(gates, 0, h)?;
            let i = g.sigmoid(i);
            let cand = g.slice_cols(gates, 2 * h, 3 * h)?;
            let cand = g.tanh(cand);
            let o = g.slice_cols(gates, 3 * h, 4 * h)?;
            let o = g.sigmoid(o);
            let mut c = g.mul(i, cand)?;
            if let Some((_, c_prev)) = prev {
                let f = g.slice_cols(gates, h, 2 * h)?;
                let f = g.sigmoid(f);
                let kept = g.mul(f, c_prev)?;
                c = g.add(kept, c)?;
            }
            let squashed = g.tanh(c);
            let h_t = g.mul(o, squashed)?;
            states.push(h_t);
            prev = Some((h_t, c));
        }
        Ok(states)
    }

    fn run_gru(&self, g: &mut Graph<'_>, projected: Var, wh: Var, wh_n: Var, steps: usize) -> Result<Vec<Var>> {
        let h = self.hidden;
        let mut states = Vec::with_capacity(steps);
        let mut prev: Option<Var> = None;
        for t in 0..steps {
            let row = g.slice_rows(projected, t, t + 1)?;
            let mut rz = g.slice_cols(row, 0, 2 * h)?;
            let mut cand = g.slice_cols(row, 2 * h, 3 * h)?;
            if let Some(h_prev) = prev {
                let rec = g.matmul(h_prev, wh)?;
                rz = g.add(rz, rec)?;
            }
            let rz = g.sigmoid(rz);
            let z = g.slice_cols(rz, h, 2 * h)?;
            if let Some(h_prev) = prev {
                let r = g.slice_cols(rz, 0, h)?;
                let gated = g.mul(r, h_prev)?;
                let rec = g.matmul(gated, wh_n)?;
                cand = g.add(cand, rec)?;
            }
            let n = g.tanh(cand);
            // h' = n + z ⊙ (h - n); h = 0 before the first step.
            let h_t = match prev {
                Some(h_prev) => {
                    let diff = g.sub(h_prev, n)?;
                    let mix = g.mul(z, diff)?;
                    g.add(n, mix)?
                }
                None => {
                    let zn = g.mul(z, n)?;
                    g.sub(n, zn)?
                }
            };
            states.push(h_t);
            prev = Some(h_t);
        }
        Ok(states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_states() {
        let mut ps = ParamSet::new();
        let mut rng = RngState::new(1);
        let rp = RecurrentParams::init(&mut ps, "rnn", RecurrentCell::Lstm, 3, 4, &mut rng).unwrap();
        for id in [rp.wx, rp.wh, rp.b] {
            ps.get_mut(id).value.data_mut().fill(0.0);
        }
        let mut g = Graph::new();
        let x = g.leaf(init_uniform(&[5, 3], 1.0, &mut rng)).unwrap();
        let hs = rp.run(&mut g, &ps, x).unwrap();
        assert_eq!(hs.len(), 5);
        for h in hs {
            assert!(g.value(h).data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut ps = ParamSet::new();
        let rp = RecurrentParams::init(&mut ps, "rnn", RecurrentCell::Lstm, 2, 3, &mut RngState::new(0)).unwrap();
        assert_eq!(
            ps.get(rp.b).value.data(),
            &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn gru_states_bounded() {
        let mut ps = ParamSet::new();
        let mut rng = RngState::new(2);
        let rp = RecurrentParams::init(&mut ps, "rnn", RecurrentCell::Gru, 3, 4, &mut rng).unwrap();
        let mut g = Graph::new();
        let x = g.leaf(init_uniform(&[6, 3], 3.0, &mut rng)).unwrap();
        for h in rp.run(&mut g, &ps, x).unwrap() {
            assert!(g.value(h).data().iter().all(|v| v.abs() < 1.0));
        }
    }
}
