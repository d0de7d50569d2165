use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};
use crate::rng::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Role of a parameter. Only `Weight` tensors are L2-regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
}

impl ParamKind {
    pub fn tag(self) -> u8 {
        match self {
            ParamKind::Weight => 0,
            ParamKind::Bias => 1,
            ParamKind::Embedding => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(ParamKind::Weight),
            1 => Some(ParamKind::Bias),
            2 => Some(ParamKind::Embedding),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor,
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Param { name, kind, value });
        Ok(ParamId(self.entries.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn weight_ids(&self) -> Vec<ParamId> {
        self.iter()
            .filter(|(_, p)| p.kind == ParamKind::Weight)
            .map(|(id, _)| id)
            .collect()
    }
}

/// Fills a fresh tensor with draws from `U(-scale, scale)`.
pub fn init_uniform(shape: &[usize], scale: f64, rng: &mut RngState) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = rng.uniform(-scale, scale);
    }
    t
}

/// Gradient of one parameter, either dense or as a set of touched rows.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrad {
    Dense(Vec<f64>),
    Rows {
        width: usize,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

impl ParamGrad {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        match self {
            ParamGrad::Dense(d) => d.clone(),
            ParamGrad::Rows { width, rows } => {
                let mut out = vec![0.0; len];
                for (&r, vals) in rows {
                    for (o, v) in out[r * width..(r + 1) * width].iter_mut().zip(vals) {
                        *o += v;
                    }
                }
                out
            }
        }
    }

    fn add_dense(&mut self, g: &[f64]) {
        match self {
            ParamGrad::Dense(d) => {
                for (a, b) in d.iter_mut().zip(g) {
                    *a += b;
                }
            }
            ParamGrad::Rows { width, rows } => {
                let mut d = vec![0.0; g.len()];
                for (&r, vals) in rows.iter() {
                    d[r * *width..(r + 1) * *width].copy_from_slice(vals);
                }
                for (a, b) in d.iter_mut().zip(g) {
                    *a += b;
                }
                *self = ParamGrad::Dense(d);
            }
        }
    }

    fn add_row(&mut self, row: usize, g: &[f64]) {
        match self {
            ParamGrad::Dense(d) => {
                let w = g.len();
                for (a, b) in d[row * w..(row + 1) * w].iter_mut().zip(g) {
                    *a += b;
                }
            }
            ParamGrad::Rows { rows, .. } => {
                let slot = rows.entry(row).or_insert_with(|| vec![0.0; g.len()]);
                for (a, b) in slot.iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            ParamGrad::Dense(d) => d.iter_mut().for_each(|x| *x *= s),
            ParamGrad::Rows { rows, .. } => rows
                .values_mut()
                .flat_map(|r| r.iter_mut())
                .for_each(|x| *x *= s),
        }
    }

    fn merge(&mut self, other: &ParamGrad) {
        match other {
            ParamGrad::Dense(d) => self.add_dense(d),
            ParamGrad::Rows { rows, .. } => {
                for (&r, vals) in rows {
                    self.add_row(r, vals);
                }
            }
        }
    }
}

/// Per-parameter gradients, indexed like the [`ParamSet`] they came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamGrads {
    slots: Vec<Option<ParamGrad>>,
}

impl ParamGrads {
    pub fn new(num_params: usize) -> Self {
        Self {
            slots: vec![None; num_params],
        }
    }

    fn ensure(&mut self, id: ParamId) {
        if self.slots.len() <= id.0 {
            self.slots.resize(id.0 + 1, None);
        }
    }

    pub fn add_dense(&mut self, id: ParamId, g: &[f64]) {
        self.ensure(id);
        match &mut self.slots[id.0] {
            Some(slot) => slot.add_dense(g),
            empty => *empty = Some(ParamGrad::Dense(g.to_vec())),
        }
    }

    pub fn add_row(&mut self, id: ParamId, row: usize, g: &[f64]) {
        self.ensure(id);
        self.slots[id.0]
            .get_or_insert_with(|| ParamGrad::Rows {
                width: g.len(),
                rows: BTreeMap::new(),
            })
            .add_row(row, g);
    }

    /// Adds `other` into `self`, slot by slot.
    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.ensure(ParamId(i));
                match &mut self.slots[i] {
                    Some(slot) => slot.merge(g),
                    empty => *empty = Some(g.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.slots.iter_mut().flatten().for_each(|g| g.scale(s));
    }

    pub fn get(&self, id: ParamId) -> Option<&ParamGrad> {
        self.slots.get(id.0).and_then(|g| g.as_ref())
    }

    /// Dense gradient for `id`, zeros when the parameter was not reached.
    pub fn dense(&self, id: ParamId, len: usize) -> Vec<f64> {
        self.get(id).map_or_else(|| vec![0.0; len], |g| g.to_dense(len))
    }

    pub fn all_finite(&self) -> bool {
        self.slots.iter().flatten().all(|g| match g {
            ParamGrad::Dense(d) => d.iter().all(|x| x.is_finite()),
            ParamGrad::Rows { rows, .. } => rows.values().flatten().all(|x| x.is_finite()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.add("w", ParamKind::Weight, Tensor::scalar(1.0)).unwrap();
        assert!(ps.add("w", ParamKind::Bias, Tensor::scalar(1.0)).is_err());
    }

    #[test]
    fn row_and_dense_grads_merge() {
        let mut g = ParamGrads::new(1);
        g.add_row(ParamId(0), 1, &[1.0, 2.0]);
        g.add_row(ParamId(0), 1, &[1.0, 1.0]);
        assert_eq!(g.dense(ParamId(0), 6), vec![0.0, 0.0, 2.0, 3.0, 0.0, 0.0]);
        g.add_dense(ParamId(0), &[1.0; 6]);
        assert_eq!(g.dense(ParamId(0), 6), vec![1.0, 1.0, 3.0, 4.0, 1.0, 1.0]);
    }
}
