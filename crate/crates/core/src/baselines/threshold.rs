//! Two-level intensity thresholding.
//!
//! Pixels at or below `t_low` are background, pixels in `(t_low, t_high]`
//! are chromosome, pixels above `t_high` are overlap. Fitting scans every
//! pair of cut points on the 256-level intensity grid and keeps the pair
//! with the fewest misclassified training pixels.

use serde::{Deserialize, Serialize};

use super::BaselineError;
use crate::dataset::Dataset;
use crate::image::{GrayImage, LabelMap};

const LEVELS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    /// Background / chromosome cut, in (0, 1).
    pub t_low: f32,
    /// Chromosome / overlap cut, in (0, 1); always above `t_low`.
    pub t_high: f32,
}

/// Candidate threshold halfway between intensity levels `i` and `i + 1`.
fn grid_value(i: usize) -> f32 {
    (i as f32 + 0.5) / 255.0
}

/// Index of the finest grid bin containing `v`: the smallest `i` with
/// `v <= grid_value(i)`. Classifying by comparing bins to grid indices is
/// then exactly equivalent to comparing raw values to grid thresholds.
fn bin_of(v: f32) -> usize {
    let b = (f64::from(v) * 255.0 - 0.5).ceil();
    b.clamp(0.0, 255.0) as usize
}

/// Merged 3-class index used for error counting: 0 bg, 1 chromosome, 2 overlap.
fn merged_class(label: u8) -> usize {
    match label {
        0 => 0,
        3 => 2,
        _ => 1,
    }
}

/// Exhaustive grid search minimizing 3-class pixel error on the training
/// set. Ties resolve to the lexicographically smallest `(t_low, t_high)`.
pub fn fit_threshold(train: &Dataset) -> Result<ThresholdModel, BaselineError> {
    if train.is_empty() {
        return Err(BaselineError::EmptyTrainSet);
    }
    // per-bin counts of each merged class
    let mut counts = [[0u64; 3]; LEVELS];
    for s in &train.samples {
        for (&v, &l) in s.image.data.iter().zip(&s.label.data) {
            counts[bin_of(v)][merged_class(l)] += 1;
        }
    }
    // cumulative counts up to and including each bin
    let mut cum = [[0u64; 3]; LEVELS];
    let mut running = [0u64; 3];
    for (bin, c) in counts.iter().enumerate() {
        for k in 0..3 {
            running[k] += c[k];
        }
        cum[bin] = running;
    }
    let total = running;

    let mut best: Option<(u64, usize, usize)> = None;
    for i in 0..LEVELS - 1 {
        for j in i + 1..LEVELS {
            // correct = bg in [0,i] + chromosome in (i,j] + overlap in (j,255]
            let correct = cum[i][0] + (cum[j][1] - cum[i][1]) + (total[2] - cum[j][2]);
            let err = (total[0] + total[1] + total[2]) - correct;
            let better = match best {
                None => true,
                Some((e, _, _)) => err < e,
            };
            if better {
                best = Some((err, i, j));
            }
        }
    }
    let (_, i, j) = best.expect("grid is non-empty");
    Ok(ThresholdModel { t_low: grid_value(i), t_high: grid_value(j) })
}

/// Per-pixel rule producing the merged 3-class map {0, 1, 3}.
pub fn threshold_predict(model: &ThresholdModel, image: &GrayImage) -> LabelMap {
    let data = image
        .data
        .iter()
        .map(|&v| {
            if v <= model.t_low {
                0
            } else if v <= model.t_high {
                1
            } else {
                3
            }
        })
        .collect();
    LabelMap::from_vec(image.h, image.w, data).expect("same dims")
}
