//! Overlapping-chromosome segmentation pipeline.
//!
//! Two chromosomes imaged during metaphase frequently cross each other;
//! resolving which pixels belong to which chromosome (and which to both)
//! is a four-class semantic segmentation problem: background, first
//! chromosome, second chromosome, overlap.
//!
//! This crate contains the whole pipeline as plain-Rust building blocks:
//!
//! * [`datagen`] — semi-synthetic dataset construction: single-chromosome
//!   sources (procedural phantoms or imported PGM pairs) are rotated,
//!   translated and averaged into overlapping pairs with exact labels.
//! * [`preprocess`] — label cleanup, center cropping to 88x88, and
//!   deterministic train/val/test splitting.
//! * [`tensor`] — a rank-4 tensor container and the forward/backward
//!   kernels (direct convolution, max pooling, nearest upsampling, ReLU,
//!   channel concat, softmax cross-entropy) the network is built from.
//!   No autodiff graph; every backward pass is written out by hand.
//! * [`network`] — the simplified U-Net-style model, training loop and
//!   checkpoint format.
//! * [`evaluation`] — per-class IOU (global and per-image mean), confusion
//!   matrices, intensity histograms and PPM overlay rendering.
//! * [`baselines`] — the two non-neural references: intensity
//!   thresholding and the contour-based crossing resolver.
//!
//! Everything is deterministic: all randomness flows from explicit 64-bit
//! seeds, and rerunning any stage with the same inputs produces
//! byte-identical artifacts.

pub mod baselines;
pub mod datagen;
pub mod dataset;
pub mod evaluation;
pub mod image;
pub mod netpbm;
pub mod network;
pub mod preprocess;
pub mod rng;
pub mod tensor;

pub use dataset::{Dataset, Sample, SampleMeta};
pub use image::{GrayImage, LabelMap, Mask};
pub use tensor::{ConvKernel, Tensor4};

/// Label value for background pixels.
pub const LABEL_BACKGROUND: u8 = 0;
/// Label value for the non-overlapping part of the first chromosome.
pub const LABEL_CHROM_A: u8 = 1;
/// Label value for the non-overlapping part of the second chromosome.
pub const LABEL_CHROM_B: u8 = 2;
/// Label value for pixels covered by both chromosomes.
pub const LABEL_OVERLAP: u8 = 3;
/// Number of segmentation classes.
pub const NUM_CLASSES: usize = 4;
