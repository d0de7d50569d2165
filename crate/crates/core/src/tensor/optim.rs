use serde::{Deserialize, Serialize};

use super::params::{ParamGrads, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers mirror the parameter layout.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, p)| vec![0.0; p.value.len()]).collect();
        Self {
            config,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, i: usize) -> &[f64] {
        &self.m[i]
    }

    pub fn second_moment(&self, i: usize) -> &[f64] {
        &self.v[i]
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamGrads) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: vec![params.len()],
                rhs: vec![self.m.len()],
            });
        }
        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let ids: Vec<_> = params.iter().map(|(id, p)| (id, p.value.len())).collect();
        for (id, len) in ids {
            let Some(grad) = grads.get(id) else {
                // Untouched parameters still see their moments decay.
                let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
                let value = params.get_mut(id).value.data_mut();
                for j in 0..len {
                    m[j] *= b1;
                    v[j] *= b2;
                    value[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                }
                continue;
            };
            let g = grad.to_dense(len);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            let value = params.get_mut(id).value.data_mut();
            for j in 0..len {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                value[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParamId, ParamKind, Tensor};

    fn two_scalars() -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("a", ParamKind::Weight, Tensor::scalar(0.5)).unwrap();
        ps.add("b", ParamKind::Weight, Tensor::scalar(0.5)).unwrap();
        ps
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut ps = two_scalars();
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let mut g = ParamGrads::new(2);
        g.add_dense(ParamId(0), &[0.0]);
        g.add_dense(ParamId(1), &[0.0]);
        adam.step(&mut ps, &g).unwrap();
        assert_eq!(ps.get(ParamId(0)).value.data(), &[0.5]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut ps = two_scalars();
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let mut g = ParamGrads::new(2);
        g.add_dense(ParamId(0), &[1.0]);
        g.add_dense(ParamId(1), &[1.0]);
        adam.step(&mut ps, &g).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction.
        let expected = -0.001 / (1.0 + 1e-8);
        let delta_a = ps.get(ParamId(0)).value.data()[0] - 0.5;
        let delta_b = ps.get(ParamId(1)).value.data()[0] - 0.5;
        assert!((delta_a - expected).abs() < 1e-15, "{delta_a}");
        assert_eq!(delta_a, delta_b);
        assert!(adam.second_moment(0)[0] >= 0.0);
    }

    #[test]
    fn step_counter_increments_once_per_call() {
        let mut ps = two_scalars();
        let mut adam = Adam::new(AdamConfig::default(), &ps);
        let g = ParamGrads::new(2);
        for i in 1..=5 {
            adam.step(&mut ps, &g).unwrap();
            assert_eq!(adam.steps(), i);
        }
    }
}
