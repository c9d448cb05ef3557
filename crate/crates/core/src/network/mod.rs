//! The simplified U-Net-style segmentation model: configuration,
//! initialization, forward/backward passes, training loop and checkpoints.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use model::{backward, forward, init_params, predict_batch, predict_dataset};
pub use train::{
    inverse_frequency_weights, train, AdamState, EpochStats, OptimizerKind, TrainConfig,
    TrainHistory,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::tensor::{ConvKernel, Dims4, Scalar, Tensor4, TensorError};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("tensor: {0}")]
    Tensor(#[from] TensorError),
    #[error("input has {found} channel(s) but the model expects {expected}")]
    BadChannels { expected: usize, found: usize },
    #[error("spatial dims {h}x{w} are not divisible by 2^{depth}")]
    NotDivisible { h: usize, w: usize, depth: usize },
    #[error("invalid configuration: {what}")]
    InvalidConfig { what: &'static str },
    #[error("loss became non-finite at epoch {epoch}, batch {batch}: training diverged")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training set is empty")]
    EmptyTrainSet,
}

/// Architecture hyperparameters. The default — two encoder levels with
/// 16 base filters — is a deliberately small U-Net-style model for
/// 88x88 single-channel inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Encoder levels (pooling steps).
    pub depth: usize,
    /// Filters at the first level; doubled at every deeper level.
    pub base_filters: usize,
    /// Output classes per pixel.
    pub num_classes: usize,
    /// Input image channels.
    pub in_channels: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { depth: 2, base_filters: 16, num_classes: crate::NUM_CLASSES, in_channels: 1 }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.depth == 0 {
            return Err(NetworkError::InvalidConfig { what: "depth must be at least 1" });
        }
        if self.base_filters == 0 {
            return Err(NetworkError::InvalidConfig { what: "base_filters must be at least 1" });
        }
        if self.num_classes < 2 {
            return Err(NetworkError::InvalidConfig { what: "num_classes must be at least 2" });
        }
        if self.in_channels == 0 {
            return Err(NetworkError::InvalidConfig { what: "in_channels must be at least 1" });
        }
        Ok(())
    }
}

/// Shapes `(out_c, in_c, kh, kw)` of every kernel, in the fixed model
/// order (see [`ModelParams`]).
pub(crate) fn kernel_shapes(config: &NetConfig) -> Vec<(usize, usize, usize, usize)> {
    let f = config.base_filters;
    let mut shapes = Vec::new();
    let mut in_c = config.in_channels;
    for level in 0..config.depth {
        let out = f << level;
        shapes.push((out, in_c, 3, 3));
        shapes.push((out, out, 3, 3));
        in_c = out;
    }
    let bottleneck = f << config.depth;
    shapes.push((bottleneck, in_c, 3, 3));
    shapes.push((bottleneck, bottleneck, 3, 3));
    for level in (0..config.depth).rev() {
        let wide = f << (level + 1);
        let narrow = f << level;
        // post-upsample halving conv, then the double conv after the skip
        // concatenation (narrow decoder + narrow skip = wide input)
        shapes.push((narrow, wide, 3, 3));
        shapes.push((narrow, wide, 3, 3));
        shapes.push((narrow, narrow, 3, 3));
    }
    shapes.push((config.num_classes, f, 1, 1));
    shapes
}

/// Total learnable parameter count for a configuration.
pub fn param_count(config: &NetConfig) -> usize {
    kernel_shapes(config)
        .iter()
        .map(|&(oc, ic, kh, kw)| oc * ic * kh * kw + oc)
        .sum()
}

/// All model weights, as an ordered kernel list.
///
/// The order is fixed and the checkpoint format depends on it:
/// 1. per encoder level (shallow to deep): double-conv kernels a, b;
/// 2. bottleneck: double-conv kernels a, b;
/// 3. per decoder level (deep to shallow): post-upsample conv, then
///    post-concatenation double-conv kernels a, b;
/// 4. the final 1x1 classification head.
///
/// Flattened parameter order within a kernel is weights (row-major,
/// `[out_c][in_c][kh][kw]`) followed by bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Scalar = f32> {
    config: NetConfig,
    kernels: Vec<ConvKernel<T>>,
}

impl<T: Scalar> ModelParams<T> {
    /// Assembles params from kernels already in model order.
    pub fn from_kernels(
        config: NetConfig,
        kernels: Vec<ConvKernel<T>>,
    ) -> Result<Self, NetworkError> {
        config.validate()?;
        let shapes = kernel_shapes(&config);
        if kernels.len() != shapes.len() {
            return Err(NetworkError::InvalidConfig { what: "kernel count does not match config" });
        }
        for (k, &(oc, ic, kh, kw)) in kernels.iter().zip(&shapes) {
            if (k.out_c, k.in_c, k.kh, k.kw) != (oc, ic, kh, kw) {
                return Err(NetworkError::InvalidConfig {
                    what: "kernel shape does not match config",
                });
            }
        }
        Ok(Self { config, kernels })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn kernels(&self) -> &[ConvKernel<T>] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [ConvKernel<T>] {
        &mut self.kernels
    }

    pub fn param_count(&self) -> usize {
        self.kernels.iter().map(ConvKernel::param_count).sum()
    }

    /// All parameters in the documented flat order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for k in &self.kernels {
            out.extend_from_slice(&k.weights);
            out.extend_from_slice(&k.bias);
        }
        out
    }

    /// Overwrites all parameters from the documented flat order.
    pub fn load_flat(&mut self, flat: &[T]) -> Result<(), NetworkError> {
        if flat.len() != self.param_count() {
            return Err(NetworkError::InvalidConfig { what: "flat parameter length mismatch" });
        }
        let mut at = 0;
        for k in &mut self.kernels {
            let nw = k.weights.len();
            k.weights.copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = k.bias.len();
            k.bias.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            kernels: self.kernels.iter().map(ConvKernel::cast).collect(),
        }
    }
}

/// Stacks dataset samples (by index) into a batch tensor plus the flat
/// per-pixel label vector the loss expects.
pub fn batch_tensor(dataset: &Dataset, indices: &[usize]) -> (Tensor4<f32>, Vec<u8>) {
    let (h, w) = (dataset.h, dataset.w);
    let n = indices.len();
    let mut data = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n * h * w);
    for &i in indices {
        let s = &dataset.samples[i];
        data.extend_from_slice(&s.image.data);
        labels.extend_from_slice(&s.label.data);
    }
    let t = Tensor4::from_vec(Dims4::new(n, 1, h, w), data).expect("consistent dataset dims");
    (t, labels)
}
