//! Mini-batch training with seeded shuffling and best-validation-loss
//! parameter selection.

use serde::{Deserialize, Serialize};

use super::model::{backward, predict_dataset};
use super::{batch_tensor, forward, ModelParams, NetworkError};
use crate::dataset::Dataset;
use crate::evaluation::evaluate_set;
use crate::image::LabelMap;
use crate::rng::{mix_seed, seeded_rng};
use crate::tensor::ops::{softmax_cross_entropy, ConvGrads};
use crate::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Per-class loss weights; `None` trains unweighted.
    pub class_weights: Option<Vec<f32>>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::default(),
            class_weights: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.batch_size == 0 {
            return Err(NetworkError::InvalidConfig { what: "batch_size must be at least 1" });
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(NetworkError::InvalidConfig { what: "learning_rate must be positive" });
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            let in_unit = |b: f64| b > 0.0 && b < 1.0;
            if !in_unit(beta1) || !in_unit(beta2) || !eps.is_finite() || eps <= 0.0 {
                return Err(NetworkError::InvalidConfig { what: "adam hyperparameters" });
            }
        }
        if let Some(w) = &self.class_weights {
            if w.len() != NUM_CLASSES {
                return Err(NetworkError::InvalidConfig {
                    what: "class_weights must have one entry per class",
                });
            }
            if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(NetworkError::InvalidConfig {
                    what: "class_weights must be non-negative and finite",
                });
            }
        }
        Ok(())
    }
}

/// Adam first/second moment accumulators over the flat parameter vector,
/// plus the step counter driving bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        Self { m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
    }
}

/// One history row per epoch. Validation fields are `None` when the
/// validation set is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Global per-class IOU on the validation set.
    pub val_iou: [Option<f64>; NUM_CLASSES],
}

pub type TrainHistory = Vec<EpochStats>;

/// Inverse class pixel frequency on a dataset, normalized so present
/// classes average to 1. Classes with no pixels get weight 0.
pub fn inverse_frequency_weights(dataset: &Dataset) -> Vec<f32> {
    let mut counts = [0u64; NUM_CLASSES];
    for s in &dataset.samples {
        for &l in &s.label.data {
            if (l as usize) < NUM_CLASSES {
                counts[l as usize] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    let mut weights = [0f64; NUM_CLASSES];
    let mut present = 0usize;
    for (w, &c) in weights.iter_mut().zip(&counts) {
        if c > 0 {
            *w = total as f64 / c as f64;
            present += 1;
        }
    }
    if present == 0 {
        return vec![0.0; NUM_CLASSES];
    }
    let mean: f64 = weights.iter().sum::<f64>() / present as f64;
    weights.iter().map(|&w| (w / mean) as f32).collect()
}

fn apply_grads(
    params: &mut ModelParams<f32>,
    grads: &[ConvGrads<f32>],
    tcfg: &TrainConfig,
    adam: &mut Option<AdamState>,
) {
    let lr = tcfg.learning_rate as f32;
    match (tcfg.optimizer, adam) {
        (OptimizerKind::Sgd, _) => {
            for (k, g) in params.kernels_mut().iter_mut().zip(grads) {
                for (p, &d) in k.weights.iter_mut().zip(&g.weights) {
                    *p -= lr * d;
                }
                for (p, &d) in k.bias.iter_mut().zip(&g.bias) {
                    *p -= lr * d;
                }
            }
        }
        (OptimizerKind::Adam { beta1, beta2, eps }, Some(state)) => {
            state.t += 1;
            let (b1, b2, eps) = (beta1 as f32, beta2 as f32, eps as f32);
            let bc1 = (1.0 - beta1.powi(state.t as i32)) as f32;
            let bc2 = (1.0 - beta2.powi(state.t as i32)) as f32;
            let mut at = 0usize;
            for (k, g) in params.kernels_mut().iter_mut().zip(grads) {
                for (p, &d) in
                    k.weights.iter_mut().chain(k.bias.iter_mut()).zip(g.weights.iter().chain(&g.bias))
                {
                    let m = &mut state.m[at];
                    let v = &mut state.v[at];
                    *m = b1 * *m + (1.0 - b1) * d;
                    *v = b2 * *v + (1.0 - b2) * d * d;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    at += 1;
                }
            }
        }
        (OptimizerKind::Adam { .. }, None) => unreachable!("adam state initialized before use"),
    }
}

fn validation_stats(
    params: &ModelParams<f32>,
    val_set: &Dataset,
    tcfg: &TrainConfig,
) -> Result<(Option<f64>, [Option<f64>; NUM_CLASSES]), NetworkError> {
    if val_set.is_empty() {
        return Ok((None, [None; NUM_CLASSES]));
    }
    let weights = tcfg.class_weights.as_deref();
    let indices: Vec<usize> = (0..val_set.samples.len()).collect();
    let mut loss_sum = 0.0f64;
    for chunk in indices.chunks(tcfg.batch_size) {
        let (batch, labels) = batch_tensor(val_set, chunk);
        let logits = forward(params, &batch)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels, weights)?;
        loss_sum += f64::from(loss) * chunk.len() as f64;
    }
    let val_loss = loss_sum / val_set.samples.len() as f64;
    let preds = predict_dataset(params, val_set, tcfg.batch_size)?;
    let truths: Vec<LabelMap> = val_set.samples.iter().map(|s| s.label.clone()).collect();
    let report = evaluate_set(&preds, &truths).expect("matching dims");
    Ok((Some(val_loss), report.per_class_global))
}

/// Runs `tcfg.epochs` of seeded-shuffled mini-batch training and returns
/// the parameters from the epoch with the best validation loss together
/// with the per-epoch history.
///
/// Validation loss uses the same class weights as training. If the
/// validation set is empty, selection falls back to training loss.
pub fn train(
    params: ModelParams<f32>,
    train_set: &Dataset,
    val_set: &Dataset,
    tcfg: &TrainConfig,
) -> Result<(ModelParams<f32>, TrainHistory), NetworkError> {
    tcfg.validate()?;
    if tcfg.epochs == 0 {
        return Ok((params, Vec::new()));
    }
    if train_set.is_empty() {
        return Err(NetworkError::EmptyTrainSet);
    }
    let weights = tcfg.class_weights.as_deref();
    let mut params = params;
    let mut adam = match tcfg.optimizer {
        OptimizerKind::Adam { .. } => Some(AdamState::new(params.param_count())),
        OptimizerKind::Sgd => None,
    };
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(f64, ModelParams<f32>)> = None;
    let n = train_set.samples.len();
    for epoch in 0..tcfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut seeded_rng(mix_seed(tcfg.seed, epoch as u64)));
        let mut loss_sum = 0.0f64;
        for (batch_idx, chunk) in order.chunks(tcfg.batch_size).enumerate() {
            let (batch, labels) = batch_tensor(train_set, chunk);
            let (loss, grads) = backward(&params, &batch, &labels, weights)?;
            let loss = f64::from(loss);
            if !loss.is_finite() {
                return Err(NetworkError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            loss_sum += loss * chunk.len() as f64;
            apply_grads(&mut params, &grads, tcfg, &mut adam);
        }
        let train_loss = loss_sum / n as f64;
        let (val_loss, val_iou) = validation_stats(&params, val_set, tcfg)?;
        let selection = val_loss.unwrap_or(train_loss);
        if best.as_ref().is_none_or(|(b, _)| selection < *b) {
            best = Some((selection, params.clone()));
        }
        history.push(EpochStats { epoch, train_loss, val_loss, val_iou });
    }
    let (_, best_params) = best.expect("at least one epoch ran");
    Ok((best_params, history))
}
