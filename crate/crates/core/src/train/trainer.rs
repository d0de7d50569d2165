//! Mini-batch training with Adam, L2 on weight matrices, and best-epoch
//! selection by validation micro-F1.

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::icd::LabelVector;
use crate::models::{Mode, Model};
use crate::rng::{RngState, Stream};
use crate::tensor::{sigmoid, Adam, AdamConfig, ParamGrads};
use crate::text::EncodedNote;

use super::metrics::{binarize, micro_f1, MetricsReport};

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub note: EncodedNote,
    pub target: LabelVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub seed: u64,
    /// Stop after this many epochs without a validation improvement.
    pub patience: Option<usize>,
    /// Keep the last epoch's parameters instead of the best-validation ones.
    pub fixed_epochs: bool,
    /// Hard cap on optimizer steps across all epochs.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 32,
            learning_rate: 0.001,
            l2_lambda: 1e-5,
            seed: 0,
            patience: None,
            fixed_epochs: false,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config("l2_lambda must be >= 0".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-example cross-entropy over the epoch, without the L2 term.
    pub train_loss: f64,
    /// Validation micro-F1 at threshold 0.5 (NaN without a validation set).
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters the model now holds (0 = initial).
    pub selected_epoch: usize,
    pub steps: usize,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_f1\n");
    for r in history {
        s.push_str(&format!("{},{:.8},{:.6}\n", r.epoch, r.train_loss, r.val_f1));
    }
    s
}

/// Sigmoid scores for every example, in order.
pub fn predict_scores(model: &Model, data: &[Example]) -> Result<Vec<Vec<f64>>> {
    data.iter()
        .map(|ex| Ok(model.logits(&ex.note)?.into_iter().map(sigmoid).collect()))
        .collect()
}

pub fn targets(data: &[Example]) -> Vec<LabelVector> {
    data.iter().map(|e| e.target.clone()).collect()
}

/// Scores, binarizes at `tau`, and counts against the truth.
pub fn evaluate(model: &Model, data: &[Example], tau: f64, partition: &str) -> Result<MetricsReport> {
    let scores = predict_scores(model, data)?;
    Ok(micro_f1(&binarize(&scores, tau), &targets(data))?.with_context(partition, tau))
}

/// Trains `model` in place. Per-example gradients are summed in batch
/// order, averaged, and combined with the L2 gradient before each Adam step.
pub fn train(model: &mut Model, train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let c = model.config().num_classes;
    if let Some(bad) = train.iter().chain(val).find(|e| e.target.len() != c) {
        return Err(Error::Shape {
            op: "train (target width vs num_classes)",
            lhs: vec![bad.target.len()],
            rhs: vec![c],
        });
    }
    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(adam_cfg, model.params());
    let mut shuffle = RngState::named(cfg.seed, Stream::Shuffle).fork(1);
    let dropout_root = RngState::named(cfg.seed, Stream::Dropout);
    let weight_ids = model.params().weight_ids();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, crate::tensor::ParamSet)> = None;
    let mut since_best = 0;
    let mut steps = 0;
    let mut seen = 0u64;

    'epochs: for epoch in 1..=cfg.epochs {
        shuffle.shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut count = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| steps >= m) {
                break;
            }
            let mut grads = ParamGrads::new(model.params().len());
            for &i in batch {
                let ex = &train[i];
                let mut rng = dropout_root.fork(seen);
                seen += 1;
                let (loss, g) = model.loss_and_grads(&ex.note, &ex.target.as_f64(), Mode::Train(&mut rng))?;
                if !loss.is_finite() || !g.all_finite() {
                    return Err(Error::Divergence { epoch, step: steps, loss });
                }
                grads.accumulate(&g);
                loss_sum += loss;
                count += 1;
            }
            grads.scale(1.0 / batch.len() as f64);
            if cfg.l2_lambda > 0.0 {
                for &id in &weight_ids {
                    let w = model.params().get(id).value.data();
                    let g: Vec<f64> = w.iter().map(|x| 2.0 * cfg.l2_lambda * x).collect();
                    grads.add_dense(id, &g);
                }
            }
            adam.step(model.params_mut(), &grads)?;
            steps += 1;
        }
        let train_loss = if count == 0 { f64::NAN } else { loss_sum / count as f64 };
        let val_f1 = if val.is_empty() {
            f64::NAN
        } else {
            evaluate(model, val, 0.5, "val")?.f1
        };
        debug!("epoch {epoch}: loss {train_loss:.6}, val F1 {val_f1:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
        });
        let improved = best.as_ref().is_none_or(|(f, _, _)| val_f1 > *f || f.is_nan());
        if improved {
            best = Some((val_f1, epoch, model.params().clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if count == 0 {
            break 'epochs;
        }
        if !cfg.fixed_epochs && cfg.patience.is_some_and(|p| since_best >= p) {
            info!("early stop after epoch {epoch}");
            break 'epochs;
        }
    }
    let mut selected_epoch = history.last().map_or(0, |r| r.epoch);
    if steps == 0 {
        selected_epoch = 0;
    } else if !cfg.fixed_epochs {
        if let Some((_, epoch, params)) = best {
            *model.params_mut() = params;
            selected_epoch = epoch;
        }
    }
    Ok(TrainOutcome {
        history,
        selected_epoch,
        steps,
    })
}
