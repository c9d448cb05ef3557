//! Forward and backward passes.
//!
//! The architecture is a fixed sequence of primitive ops (conv, ReLU,
//! pool, upsample, skip bookkeeping) derived from the configuration.
//! The forward pass records each op's input; the backward pass walks the
//! same sequence in reverse, so gradients are exact by construction of
//! the per-op backward rules.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{kernel_shapes, ModelParams, NetConfig, NetworkError};
use crate::dataset::Dataset;
use crate::image::LabelMap;
use crate::tensor::ops::{
    concat_channels, conv2d_backward, conv2d_forward, maxpool2x2_backward, maxpool2x2_forward,
    relu_backward, relu_forward, softmax_cross_entropy, split_channels, upsample2x_backward,
    upsample2x_nearest, ConvGrads, PoolIndices,
};
use crate::tensor::{ConvKernel, Scalar, Tensor4};

/// He-style initialization: weights ~ N(0, sqrt(2 / fan_in)), biases zero.
pub fn init_params<T: Scalar>(
    config: &NetConfig,
    rng: &mut impl Rng,
) -> Result<ModelParams<T>, NetworkError> {
    config.validate()?;
    let mut kernels = Vec::new();
    for (oc, ic, kh, kw) in kernel_shapes(config) {
        let fan_in = ic * kh * kw;
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let weights: Vec<T> =
            (0..oc * ic * kh * kw).map(|_| T::from_f64(normal.sample(rng))).collect();
        let bias = vec![T::zero(); oc];
        kernels.push(ConvKernel::from_parts(oc, ic, kh, kw, weights, bias)?);
    }
    ModelParams::from_kernels(*config, kernels)
}

/// One primitive op in the model's fixed execution order. `Conv` holds
/// the kernel index in [`ModelParams`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Conv(usize),
    Relu,
    Pool,
    Upsample,
    /// Remember the current activation as a skip connection.
    PushSkip,
    /// Concatenate the most recent skip connection onto the channels.
    PopConcat,
}

fn build_steps(config: &NetConfig) -> Vec<Step> {
    let mut steps = Vec::new();
    let mut k = 0;
    let mut conv_relu = |steps: &mut Vec<Step>| {
        steps.push(Step::Conv(k));
        steps.push(Step::Relu);
        k += 1;
    };
    for _ in 0..config.depth {
        conv_relu(&mut steps);
        conv_relu(&mut steps);
        steps.push(Step::PushSkip);
        steps.push(Step::Pool);
    }
    conv_relu(&mut steps);
    conv_relu(&mut steps);
    for _ in 0..config.depth {
        steps.push(Step::Upsample);
        conv_relu(&mut steps);
        steps.push(Step::PopConcat);
        conv_relu(&mut steps);
        conv_relu(&mut steps);
    }
    steps.push(Step::Conv(k)); // head: logits, no activation
    steps
}

/// What the backward pass needs from one forward step.
enum Saved<T: Scalar> {
    /// The step's input tensor (conv and ReLU).
    Input(Tensor4<T>),
    /// Pooling argmax bookkeeping.
    Pool(PoolIndices),
    /// Decoder-side channel count at a concatenation.
    SplitAt(usize),
    Nothing,
}

fn check_input<T: Scalar>(config: &NetConfig, batch: &Tensor4<T>) -> Result<(), NetworkError> {
    let d = batch.dims();
    if d.c != config.in_channels {
        return Err(NetworkError::BadChannels { expected: config.in_channels, found: d.c });
    }
    let div = 1usize << config.depth;
    if !d.h.is_multiple_of(div) || !d.w.is_multiple_of(div) {
        return Err(NetworkError::NotDivisible { h: d.h, w: d.w, depth: config.depth });
    }
    Ok(())
}

fn run_forward<T: Scalar>(
    params: &ModelParams<T>,
    batch: &Tensor4<T>,
    want_cache: bool,
) -> Result<(Tensor4<T>, Vec<Saved<T>>), NetworkError> {
    check_input(&params.config, batch)?;
    let steps = build_steps(&params.config);
    let mut cache = Vec::with_capacity(if want_cache { steps.len() } else { 0 });
    let mut skips: Vec<Tensor4<T>> = Vec::new();
    let mut cur = batch.clone();
    for step in &steps {
        let saved;
        match *step {
            Step::Conv(i) => {
                let next = conv2d_forward(&cur, &params.kernels[i])?;
                saved = Saved::Input(std::mem::replace(&mut cur, next));
            }
            Step::Relu => {
                let next = relu_forward(&cur);
                saved = Saved::Input(std::mem::replace(&mut cur, next));
            }
            Step::Pool => {
                let (next, idx) = maxpool2x2_forward(&cur)?;
                cur = next;
                saved = Saved::Pool(idx);
            }
            Step::Upsample => {
                cur = upsample2x_nearest(&cur);
                saved = Saved::Nothing;
            }
            Step::PushSkip => {
                skips.push(cur.clone());
                saved = Saved::Nothing;
            }
            Step::PopConcat => {
                let skip = skips.pop().expect("encoder pushed a skip for this level");
                let c_before = cur.dims().c;
                cur = concat_channels(&cur, &skip)?;
                saved = Saved::SplitAt(c_before);
            }
        }
        if want_cache {
            cache.push(saved);
        }
    }
    Ok((cur, cache))
}

/// Runs the model; logits have the input's spatial dims and
/// `num_classes` channels.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    batch: &Tensor4<T>,
) -> Result<Tensor4<T>, NetworkError> {
    run_forward(params, batch, false).map(|(logits, _)| logits)
}

fn add_into<T: Scalar>(acc: &mut Tensor4<T>, other: &Tensor4<T>) {
    debug_assert_eq!(acc.dims(), other.dims());
    for (a, &b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
}

/// Loss and exact parameter gradients (aligned with the kernel order) of
/// the weighted softmax cross-entropy on one batch.
pub fn backward<T: Scalar>(
    params: &ModelParams<T>,
    batch: &Tensor4<T>,
    labels: &[u8],
    class_weights: Option<&[T]>,
) -> Result<(T, Vec<ConvGrads<T>>), NetworkError> {
    let (logits, cache) = run_forward(params, batch, true)?;
    let (loss, dlogits) = softmax_cross_entropy(&logits, labels, class_weights)?;
    let steps = build_steps(&params.config);
    let mut grads: Vec<Option<ConvGrads<T>>> = params.kernels.iter().map(|_| None).collect();
    let mut skip_grads: Vec<Tensor4<T>> = Vec::new();
    let mut up = dlogits;
    for (step, saved) in steps.iter().zip(cache).rev() {
        match (*step, saved) {
            (Step::Conv(i), Saved::Input(x)) => {
                let (dx, g) = conv2d_backward(&x, &params.kernels[i], &up)?;
                grads[i] = Some(g);
                up = dx;
            }
            (Step::Relu, Saved::Input(z)) => {
                up = relu_backward(&z, &up)?;
            }
            (Step::Pool, Saved::Pool(idx)) => {
                up = maxpool2x2_backward(&up, &idx)?;
            }
            (Step::Upsample, Saved::Nothing) => {
                up = upsample2x_backward(&up)?;
            }
            (Step::PopConcat, Saved::SplitAt(c)) => {
                let (d_cur, d_skip) = split_channels(&up, c)?;
                skip_grads.push(d_skip);
                up = d_cur;
            }
            (Step::PushSkip, Saved::Nothing) => {
                let d_skip = skip_grads.pop().expect("decoder recorded a gradient");
                add_into(&mut up, &d_skip);
            }
            _ => unreachable!("cache entry does not match its step"),
        }
    }
    let grads = grads.into_iter().map(|g| g.expect("every kernel is used once")).collect();
    Ok((loss, grads))
}

/// Per-pixel argmax over class channels; ties resolve to the lowest
/// class index.
pub fn predict_batch(
    params: &ModelParams<f32>,
    batch: &Tensor4<f32>,
) -> Result<Vec<LabelMap>, NetworkError> {
    let logits = forward(params, batch)?;
    let d = logits.dims();
    let hw = d.h * d.w;
    let mut out = Vec::with_capacity(d.n);
    for n in 0..d.n {
        let mut data = vec![0u8; hw];
        for (p, slot) in data.iter_mut().enumerate() {
            let mut best_c = 0usize;
            let mut best_v = logits.plane(n, 0)[p];
            for c in 1..d.c {
                let v = logits.plane(n, c)[p];
                if v > best_v {
                    best_v = v;
                    best_c = c;
                }
            }
            *slot = best_c as u8;
        }
        out.push(LabelMap::from_vec(d.h, d.w, data).expect("same dims"));
    }
    Ok(out)
}

/// Predictions for a whole dataset, processed in batches.
pub fn predict_dataset(
    params: &ModelParams<f32>,
    dataset: &Dataset,
    batch_size: usize,
) -> Result<Vec<LabelMap>, NetworkError> {
    let batch_size = batch_size.max(1);
    let indices: Vec<usize> = (0..dataset.samples.len()).collect();
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(batch_size) {
        let (batch, _) = super::batch_tensor(dataset, chunk);
        out.extend(predict_batch(params, &batch)?);
    }
    Ok(out)
}
