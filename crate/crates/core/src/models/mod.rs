//! Classifier architectures: encoded note ids in, per-class logits out.
//!
//! Every neural variant is a [`Model`]: a [`ModelConfig`] plus a named
//! [`ParamSet`]. Parameter names are stable and double as checkpoint keys:
//!
//! | name | shape | variants |
//! |------|-------|----------|
//! | `embedding` | `V × d` | all |
//! | `conv{k}.filters`, `conv{k}.bias` | `(k·d) × F`, `1 × F` | cnn, cnn_attention |
//! | `conv{k}.attn.{w,b,v}` | `F × a`, `1 × a`, `a × 1` | cnn_attention |
//! | `rnn.{wx,wh,b}` (+ `wh_n` for GRU) | see [`recurrent`] | lstm, lstm_attention |
//! | `attn.{w,b,v}` | `h × a`, `1 × a`, `a × 1` | lstm_attention |
//! | `word_rnn.*`, `word_attn.*`, `sent_rnn.*`, `sent_attn.*` | | han |
//! | `out.w`, `out.b` | `D × C`, `1 × C` | all |

pub mod attention;
pub mod baseline;
mod config;
pub mod embedding;
mod forward;
pub mod recurrent;

use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::{init_uniform, Graph, ParamGrads, ParamId, ParamKind, ParamSet, Tensor, Var};
use crate::text::{EncodedNote, PAD};

pub use attention::{attention_pool, AttentionParams};
pub use baseline::BaselinePredictor;
pub use config::{ModelConfig, Variant};
pub use embedding::{load_pretrained_vectors, PretrainedReport};
pub use recurrent::{RecurrentCell, RecurrentParams};

/// Half-width of the uniform weight initializer.
pub const INIT_SCALE: f64 = 0.05;

pub(crate) fn lookup(params: &ParamSet, name: &str) -> Result<ParamId> {
    params
        .id(name)
        .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))
}

/// Forward-pass mode. Dropout draws from the given stream in training only.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut RngState),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Attention weights recorded at one pooling site.
#[derive(Debug, Clone, Copy)]
pub struct AttentionSite {
    pub weights: Var,
    pub valid: usize,
}

/// Attention weights of one site, keyed by site name.
pub type NamedWeights = (String, Vec<f64>);

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `1 × C` logits.
    pub logits: Var,
    pub attention: Vec<(String, AttentionSite)>,
}

#[derive(Debug, Clone)]
pub(crate) enum Layout {
    Cnn {
        convs: Vec<(usize, ParamId, ParamId)>,
        attention: Option<Vec<AttentionParams>>,
    },
    Rnn {
        rnn: RecurrentParams,
        attention: Option<AttentionParams>,
    },
    Han {
        word_rnn: RecurrentParams,
        word_attn: AttentionParams,
        sent_rnn: RecurrentParams,
        sent_attn: AttentionParams,
    },
}

/// A neural classifier: configuration plus parameters.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamSet,
    embedding: ParamId,
    out_w: ParamId,
    out_b: ParamId,
    layout: Layout,
}

impl Model {
    /// Fresh model with weights drawn from `rng`.
    pub fn new(config: ModelConfig, rng: &mut RngState) -> Result<Self> {
        config.validate()?;
        if config.variant == Variant::Baseline {
            return Err(Error::Config("the baseline has no neural parameters".into()));
        }
        let mut params = ParamSet::new();
        let d = config.embedding_dim;
        let mut table = init_uniform(&[config.vocab_size, d], INIT_SCALE, rng);
        table.data_mut()[PAD * d..(PAD + 1) * d].fill(0.0);
        params.add("embedding", ParamKind::Embedding, table)?;
        let (h, a) = (config.lstm_hidden_dim, config.attention_dim);
        match config.variant {
            Variant::Cnn | Variant::CnnAttention => {
                let f = config.cnn_filters_per_window;
                for &k in &config.cnn_window_sizes {
                    params.add(
                        format!("conv{k}.filters"),
                        ParamKind::Weight,
                        init_uniform(&[k * d, f], INIT_SCALE, rng),
                    )?;
                    params.add(format!("conv{k}.bias"), ParamKind::Bias, Tensor::zeros(&[1, f]))?;
                    if config.variant == Variant::CnnAttention {
                        AttentionParams::init(&mut params, &format!("conv{k}.attn"), f, a, rng)?;
                    }
                }
            }
            Variant::Lstm | Variant::LstmAttention => {
                RecurrentParams::init(&mut params, "rnn", config.rnn_cell, d, h, rng)?;
                if config.variant == Variant::LstmAttention {
                    AttentionParams::init(&mut params, "attn", h, a, rng)?;
                }
            }
            Variant::HierAttention => {
                RecurrentParams::init(&mut params, "word_rnn", config.rnn_cell, d, h, rng)?;
                AttentionParams::init(&mut params, "word_attn", h, a, rng)?;
                RecurrentParams::init(&mut params, "sent_rnn", config.rnn_cell, h, h, rng)?;
                AttentionParams::init(&mut params, "sent_attn", h, a, rng)?;
            }
            Variant::Baseline => unreachable!(),
        }
        let feat = config.feature_width();
        params.add(
            "out.w",
            ParamKind::Weight,
            init_uniform(&[feat, config.num_classes], INIT_SCALE, rng),
        )?;
        params.add("out.b", ParamKind::Bias, Tensor::zeros(&[1, config.num_classes]))?;
        Self::from_params(config, params)
    }

    /// Rebinds a parameter set (e.g. from a checkpoint), checking every
    /// expected name and shape.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let expect = |name: &str, shape: &[usize]| -> Result<ParamId> {
            let id = lookup(&params, name)?;
            let got = params.get(id).value.shape();
            if got != shape {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {got:?}, expected {shape:?}"
                )));
            }
            Ok(id)
        };
        let (d, h, c) = (config.embedding_dim, config.lstm_hidden_dim, config.num_classes);
        let embedding = expect("embedding", &[config.vocab_size, d])?;
        let out_w = expect("out.w", &[config.feature_width(), c])?;
        let out_b = expect("out.b", &[1, c])?;
        let cell = config.rnn_cell;
        let layout = match config.variant {
            Variant::Cnn | Variant::CnnAttention => {
                let f = config.cnn_filters_per_window;
                let mut convs = Vec::new();
                let mut attns = Vec::new();
                for &k in &config.cnn_window_sizes {
                    convs.push((
                        k,
                        expect(&format!("conv{k}.filters"), &[k * d, f])?,
                        expect(&format!("conv{k}.bias"), &[1, f])?,
                    ));
                    if config.variant == Variant::CnnAttention {
                        attns.push(AttentionParams::resolve(&params, &format!("conv{k}.attn"))?);
                    }
                }
                Layout::Cnn {
                    convs,
                    attention: (config.variant == Variant::CnnAttention).then_some(attns),
                }
            }
            Variant::Lstm | Variant::LstmAttention => Layout::Rnn {
                rnn: RecurrentParams::resolve(&params, "rnn", cell, h)?,
                attention: if config.variant == Variant::LstmAttention {
                    Some(AttentionParams::resolve(&params, "attn")?)
                } else {
                    None
                },
            },
            Variant::HierAttention => Layout::Han {
                word_rnn: RecurrentParams::resolve(&params, "word_rnn", cell, h)?,
                word_attn: AttentionParams::resolve(&params, "word_attn")?,
                sent_rnn: RecurrentParams::resolve(&params, "sent_rnn", cell, h)?,
                sent_attn: AttentionParams::resolve(&params, "sent_attn")?,
            },
            Variant::Baseline => {
                return Err(Error::Config("the baseline has no neural parameters".into()))
            }
        };
        Ok(Self {
            config,
            params,
            embedding,
            out_w,
            out_b,
            layout,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn embedding_id(&self) -> ParamId {
        self.embedding
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Scalars excluding the embedding table.
    pub fn num_encoder_parameters(&self) -> usize {
        self.num_parameters() - self.params.get(self.embedding).value.len()
    }

    /// Builds the forward graph for one note.
    pub fn forward<'p>(&'p self, g: &mut Graph<'p>, note: &EncodedNote, mode: Mode<'_>) -> Result<ForwardOutput> {
        if note.ids.len() != self.config.max_len {
            return Err(Error::Shape {
                op: "forward (note length vs max_len)",
                lhs: vec![note.ids.len()],
                rhs: vec![self.config.max_len],
            });
        }
        forward::run(self, g, note, mode)
    }

    /// Inference-mode logits.
    pub fn logits(&self, note: &EncodedNote) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, note, Mode::Eval)?;
        Ok(g.value(out.logits).data().to_vec())
    }

    /// Inference-mode logits plus the attention weights at every site,
    /// truncated to their valid prefix.
    pub fn logits_with_attention(&self, note: &EncodedNote) -> Result<(Vec<f64>, Vec<NamedWeights>)> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, note, Mode::Eval)?;
        let sites = out
            .attention
            .iter()
            .map(|(name, s)| (name.clone(), g.value(s.weights).data()[..s.valid].to_vec()))
            .collect();
        Ok((g.value(out.logits).data().to_vec(), sites))
    }

    /// Cross-entropy of one note against a multi-hot target, with gradients
    /// for every parameter it touched.
    pub fn loss_and_grads(&self, note: &EncodedNote, target: &[f64], mode: Mode<'_>) -> Result<(f64, ParamGrads)> {
        let mut g = Graph::new();
        let out = self.forward(&mut g, note, mode)?;
        let targets = Tensor::row(target.to_vec());
        let loss = g.multilabel_cross_entropy(out.logits, &targets)?;
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?.into_params();
        Ok((value, grads))
    }

    fn dense_head<'p>(&'p self, g: &mut Graph<'p>, features: Var, mode: Mode<'_>) -> Result<Var> {
        let features = match mode {
            Mode::Train(rng) => g.dropout(features, self.config.dropout_rate, rng, true)?,
            Mode::Eval => features,
        };
        let w = g.param(&self.params, self.out_w)?;
        let b = g.param(&self.params, self.out_b)?;
        g.affine(features, w, b)
    }
}
