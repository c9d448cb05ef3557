//! Label cleanup, center cropping and dataset splitting.
//!
//! The label maps produced by composing two chromosome masks can carry a
//! value of 4 where an imported ground truth disagreed with itself, plus
//! stray 1/2 pixels around mask borders. Cleaning replaces the 4s by a
//! neighborhood vote, removes the isolated border pixels, and crops the
//! 94x93 rasters to 88x88 so both spatial dims survive two rounds of
//! 2x2 pooling.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::dataset::{Dataset, Sample};
use crate::image::{GrayImage, LabelMap};
use crate::rng::seeded_rng;

/// Output raster side after [`crop_center`] in the standard pipeline.
pub const CROP_SIZE: usize = 88;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("cannot crop {h}x{w} raster to {th}x{tw}")]
    TooSmallForCrop { h: usize, w: usize, th: usize, tw: usize },
    #[error("need at least 3 samples to split, got {n}")]
    TooFewSamples { n: usize },
    #[error("split fractions sum to {sum}, expected 1.0")]
    BadFractions { sum: f64 },
}

/// Train/validation/test partition parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// The standard 64/16/20 split.
    pub fn new(seed: u64) -> Self {
        Self { train_frac: 0.64, val_frac: 0.16, test_frac: 0.20, seed }
    }

    fn validate(&self) -> Result<(), PreprocessError> {
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PreprocessError::BadFractions { sum });
        }
        Ok(())
    }
}

const NEIGHBORS8: [(i32, i32); 8] =
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Replaces every label-4 pixel by the majority label among its
/// 8-neighbors, considering only neighbor values in `{0,1,2,3}`. Ties
/// break toward the smaller label; a 4 with no valid neighbor becomes
/// background. The output never contains a 4.
pub fn fix_label4(label: &LabelMap) -> LabelMap {
    let mut out = label.clone();
    for y in 0..label.h {
        for x in 0..label.w {
            if label.get(y, x) != 4 {
                continue;
            }
            let mut counts = [0u32; 4];
            for (dy, dx) in NEIGHBORS8 {
                let (ny, nx) = (y as i32 + dy, x as i32 + dx);
                if ny < 0 || nx < 0 || ny >= label.h as i32 || nx >= label.w as i32 {
                    continue;
                }
                let v = label.get(ny as usize, nx as usize);
                if v < 4 {
                    counts[v as usize] += 1;
                }
            }
            // Scanning upward with a strict > keeps the smallest label on
            // ties; all-zero counts leave background, which is also the
            // no-valid-neighbor rule.
            let mut best = 0u8;
            let mut best_count = counts[0];
            for (k, &c) in counts.iter().enumerate().skip(1) {
                if c > best_count {
                    best = k as u8;
                    best_count = c;
                }
            }
            out.set(y, x, best);
        }
    }
    out
}

/// One simultaneous pass over the input: every pixel labeled 1 or 2 with
/// fewer than 3 nonzero 8-neighbors (counted in the input buffer) becomes
/// background. Labels 0 and 3 never change.
pub fn remove_artifacts(label: &LabelMap) -> LabelMap {
    let mut out = label.clone();
    for y in 0..label.h {
        for x in 0..label.w {
            let v = label.get(y, x);
            if v != 1 && v != 2 {
                continue;
            }
            let mut nonzero = 0u32;
            for (dy, dx) in NEIGHBORS8 {
                let (ny, nx) = (y as i32 + dy, x as i32 + dx);
                if ny < 0 || nx < 0 || ny >= label.h as i32 || nx >= label.w as i32 {
                    continue;
                }
                if label.get(ny as usize, nx as usize) != 0 {
                    nonzero += 1;
                }
            }
            if nonzero < 3 {
                out.set(y, x, 0);
            }
        }
    }
    out
}

/// Crops image and label identically to `th x tw`, centered with floored
/// offsets: for the standard 94x93 input and 88x88 target the crop
/// removes 3 rows from the top and 2 columns from the left.
pub fn crop_center(sample: &Sample, th: usize, tw: usize) -> Result<Sample, PreprocessError> {
    let (h, w) = (sample.image.h, sample.image.w);
    if h < th || w < tw {
        return Err(PreprocessError::TooSmallForCrop { h, w, th, tw });
    }
    let (top, left) = ((h - th) / 2, (w - tw) / 2);
    let mut image = GrayImage::zeros(th, tw);
    let mut label = LabelMap::zeros(th, tw);
    for y in 0..th {
        for x in 0..tw {
            image.set(y, x, sample.image.get(top + y, left + x));
            label.set(y, x, sample.label.get(top + y, left + x));
        }
    }
    Ok(Sample { image, label, meta: sample.meta.clone() })
}

/// Applies [`fix_label4`] then [`remove_artifacts`] to every label map;
/// images and metadata pass through untouched.
pub fn clean_dataset(dataset: &Dataset) -> Dataset {
    let mut out = Dataset::new(dataset.h, dataset.w);
    for s in &dataset.samples {
        let label = remove_artifacts(&fix_label4(&s.label));
        out.samples.push(Sample { image: s.image.clone(), label, meta: s.meta.clone() });
    }
    out
}

/// [`crop_center`] applied to every sample.
pub fn crop_dataset(dataset: &Dataset, th: usize, tw: usize) -> Result<Dataset, PreprocessError> {
    let mut out = Dataset::new(th, tw);
    for s in &dataset.samples {
        out.samples.push(crop_center(s, th, tw)?);
    }
    Ok(out)
}

/// Sample indices of the train, validation, and test partitions.
pub type SplitIndices = (Vec<usize>, Vec<usize>, Vec<usize>);

/// Seeded Fisher–Yates shuffle of `[0, n)`, then floor-then-remainder
/// sizing: train gets `floor(train_frac * n)`, val `floor(val_frac * n)`,
/// test everything left over.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices, PreprocessError> {
    spec.validate()?;
    if n < 3 {
        return Err(PreprocessError::TooFewSamples { n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seeded_rng(spec.seed));
    let n_train = (spec.train_frac * n as f64).floor() as usize;
    let n_val = (spec.val_frac * n as f64).floor() as usize;
    let val_end = n_train + n_val;
    let train = indices[..n_train].to_vec();
    let val = indices[n_train..val_end].to_vec();
    let test = indices[val_end..].to_vec();
    Ok((train, val, test))
}

/// Partitions a dataset into train/validation/test per [`split_indices`].
pub fn split(
    dataset: &Dataset,
    spec: &SplitSpec,
) -> Result<(Dataset, Dataset, Dataset), PreprocessError> {
    let (ti, vi, si) = split_indices(dataset.samples.len(), spec)?;
    Ok((dataset.select(&ti), dataset.select(&vi), dataset.select(&si)))
}
