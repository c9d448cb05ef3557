//! Non-neural comparison methods: intensity thresholding and the
//! contour-based geometric crossing resolver.
//!
//! Neither baseline can tell the two chromosomes apart, so both emit the
//! merged 3-class labeling {0 background, 1 chromosome, 3 overlap} and are
//! scored against ground truth collapsed the same way
//! (see [`crate::evaluation::merge_chromosome_classes`]).

mod geometry;
mod threshold;

pub use geometry::{
    crossing_domain, enumerate_pairings, find_remarkable_points, geometric_resolve,
    polygonal_approx, trace_contour, GeometricOutcome, Polygon, DEFAULT_APPROX_EPSILON,
    DEFAULT_REFLEX_MARGIN_DEG,
};
pub use threshold::{fit_threshold, threshold_predict, ThresholdModel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::evaluation::{evaluate_set, merge_chromosome_classes, EvalError, IouReport};
use crate::image::LabelMap;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("cannot fit a threshold on an empty training set")]
    EmptyTrainSet,
    #[error("cannot trace the contour of an empty mask")]
    EmptyMask,
    #[error("contour tracing did not close after {steps} steps")]
    TraceFailed { steps: usize },
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

/// Evaluation report for a baseline: the usual IOU/confusion schema plus,
/// for the geometric method, the fraction of samples it was applicable to
/// (the rest fell back to thresholding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    #[serde(flatten)]
    pub iou: IouReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub applicable_fraction: Option<f64>,
}

impl BaselineReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = self.iou.to_text();
        if let Some(f) = self.applicable_fraction {
            out.push_str(&format!("\napplicable_fraction: {f:.4}\n"));
        }
        out
    }
}

/// Threshold predictions for every sample, in dataset order.
pub fn run_threshold(model: &ThresholdModel, dataset: &Dataset) -> Vec<LabelMap> {
    dataset.samples.par_iter().map(|s| threshold_predict(model, &s.image)).collect()
}

/// Geometric predictions for every sample plus the applicable fraction.
/// Inapplicable samples carry the threshold fallback prediction.
pub fn run_geometric(
    model: &ThresholdModel,
    dataset: &Dataset,
    epsilon: f64,
) -> (Vec<LabelMap>, f64) {
    let outcomes: Vec<GeometricOutcome> = dataset
        .samples
        .par_iter()
        .map(|s| geometric_resolve(&s.image, model, epsilon))
        .collect();
    let n = outcomes.len();
    let applicable = outcomes.iter().filter(|o| o.applicable).count();
    let preds = outcomes.into_iter().map(|o| o.prediction).collect();
    let fraction = if n == 0 { 0.0 } else { applicable as f64 / n as f64 };
    (preds, fraction)
}

/// Scores baseline predictions against merged 3-class ground truth.
pub fn score_merged(
    preds: &[LabelMap],
    dataset: &Dataset,
    applicable_fraction: Option<f64>,
) -> Result<BaselineReport, BaselineError> {
    let truths: Vec<LabelMap> =
        dataset.samples.iter().map(|s| merge_chromosome_classes(&s.label)).collect();
    let iou = evaluate_set(preds, &truths)?;
    Ok(BaselineReport { iou, applicable_fraction })
}
