//! Metrics, histograms and rendered overlays.
//!
//! IOU is reported two ways: *global* (micro — intersections and unions
//! summed over the whole set before dividing) and *per-image mean*, with
//! images lacking a class in both prediction and truth excluded from the
//! mean. Acceptance thresholds use the global numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::image::{GrayImage, LabelMap};
use crate::netpbm::{write_ppm, NetpbmError, Ppm};
use crate::NUM_CLASSES;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction is {ph}x{pw} but truth is {th}x{tw}")]
    DimMismatch { ph: usize, pw: usize, th: usize, tw: usize },
    #[error("{preds} predictions against {truths} ground truths")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("label {label} outside the {NUM_CLASSES}-class range")]
    BadLabel { label: u8 },
    #[error("ppm: {0}")]
    Netpbm(#[from] NetpbmError),
}

/// Per-class segmentation quality over an evaluated set.
///
/// `None` entries mean the class never occurred (in either prediction or
/// truth), so the ratio is undefined rather than zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    /// Micro IOU: summed intersections over summed unions.
    pub per_class_global: [Option<f64>; NUM_CLASSES],
    /// Mean of per-image IOUs, undefined images excluded.
    pub per_class_mean: [Option<f64>; NUM_CLASSES],
    /// `confusion[t][p]` = pixels of true class `t` predicted as `p`.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

fn check_dims(pred: &LabelMap, truth: &LabelMap) -> Result<(), EvalError> {
    if pred.h != truth.h || pred.w != truth.w {
        return Err(EvalError::DimMismatch { ph: pred.h, pw: pred.w, th: truth.h, tw: truth.w });
    }
    Ok(())
}

/// Intersection-over-union of one class between two label maps.
/// `Ok(None)` when the class appears in neither.
pub fn iou(pred: &LabelMap, truth: &LabelMap, class_id: u8) -> Result<Option<f64>, EvalError> {
    check_dims(pred, truth)?;
    let mut inter = 0u64;
    let mut union = 0u64;
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        let in_p = p == class_id;
        let in_t = t == class_id;
        inter += u64::from(in_p && in_t);
        union += u64::from(in_p || in_t);
    }
    Ok(if union == 0 { None } else { Some(inter as f64 / union as f64) })
}

/// Pixel confusion counts, rows indexed by ground truth.
pub fn confusion(
    pred: &LabelMap,
    truth: &LabelMap,
) -> Result<[[u64; NUM_CLASSES]; NUM_CLASSES], EvalError> {
    check_dims(pred, truth)?;
    let mut m = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (&p, &t) in pred.data.iter().zip(&truth.data) {
        if p as usize >= NUM_CLASSES {
            return Err(EvalError::BadLabel { label: p });
        }
        if t as usize >= NUM_CLASSES {
            return Err(EvalError::BadLabel { label: t });
        }
        m[t as usize][p as usize] += 1;
    }
    Ok(m)
}

/// Full report over paired prediction/truth sets.
pub fn evaluate_set(preds: &[LabelMap], truths: &[LabelMap]) -> Result<IouReport, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    let mut inter = [0u64; NUM_CLASSES];
    let mut union = [0u64; NUM_CLASSES];
    let mut mean_acc = [(0.0f64, 0usize); NUM_CLASSES];
    let mut conf = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for (pred, truth) in preds.iter().zip(truths) {
        let c = confusion(pred, truth)?;
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                conf[t][p] += c[t][p];
            }
        }
        for k in 0..NUM_CLASSES {
            let mut i = 0u64;
            let mut u = 0u64;
            for (&p, &t) in pred.data.iter().zip(&truth.data) {
                let in_p = p as usize == k;
                let in_t = t as usize == k;
                i += u64::from(in_p && in_t);
                u += u64::from(in_p || in_t);
            }
            inter[k] += i;
            union[k] += u;
            if u > 0 {
                mean_acc[k].0 += i as f64 / u as f64;
                mean_acc[k].1 += 1;
            }
        }
    }
    let mut report = IouReport {
        per_class_global: [None; NUM_CLASSES],
        per_class_mean: [None; NUM_CLASSES],
        confusion: conf,
    };
    for k in 0..NUM_CLASSES {
        if union[k] > 0 {
            report.per_class_global[k] = Some(inter[k] as f64 / union[k] as f64);
        }
        if mean_acc[k].1 > 0 {
            report.per_class_mean[k] = Some(mean_acc[k].0 / mean_acc[k].1 as f64);
        }
    }
    Ok(report)
}

/// Collapses the four classes onto the 3-class problem the baselines can
/// express: both chromosomes merge into a single "chromosome" class.
/// (0 stays 0, 1 and 2 become 1, 3 stays 3.)
pub fn merge_chromosome_classes(label: &LabelMap) -> LabelMap {
    let data = label.data.iter().map(|&v| if v == 2 { 1 } else { v }).collect();
    LabelMap::from_vec(label.h, label.w, data).expect("same dims")
}

/// Intensity histograms of the two chromosome populations: single-cover
/// pixels (labels 1 and 2) against overlap pixels (label 3), over the
/// 256 intensity bins of the on-disk image encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntensityHistogram {
    pub single: Vec<u64>,
    pub overlap: Vec<u64>,
}

pub fn intensity_histogram(dataset: &Dataset) -> IntensityHistogram {
    let mut hist = IntensityHistogram { single: vec![0; 256], overlap: vec![0; 256] };
    for s in &dataset.samples {
        for (&b, &l) in s.image.to_u8().iter().zip(&s.label.data) {
            match l {
                1 | 2 => hist.single[b as usize] += 1,
                3 => hist.overlap[b as usize] += 1,
                _ => {}
            }
        }
    }
    hist
}

impl IntensityHistogram {
    /// CSV rows `class,bin,count` for both populations.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,bin,count\n");
        for (bin, &count) in self.single.iter().enumerate() {
            out.push_str(&format!("single,{bin},{count}\n"));
        }
        for (bin, &count) in self.overlap.iter().enumerate() {
            out.push_str(&format!("overlap,{bin},{count}\n"));
        }
        out
    }

    /// Fraction of overlap-class pixels whose intensity bin falls inside
    /// the closed support interval of the single-class histogram — the
    /// quantitative form of "the histograms overlap".
    pub fn overlap_mass_in_single_support(&self) -> f64 {
        let lo = self.single.iter().position(|&c| c > 0);
        let hi = self.single.iter().rposition(|&c| c > 0);
        let (Some(lo), Some(hi)) = (lo, hi) else { return 0.0 };
        let total: u64 = self.overlap.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let inside: u64 = self.overlap[lo..=hi].iter().sum();
        inside as f64 / total as f64
    }
}

/// Writes the class-colored rendering next to the grayscale image:
/// background keeps its intensity, label 1 is red, 2 green, 3 blue.
pub fn render_overlay(
    image: &GrayImage,
    label: &LabelMap,
    path: &Path,
) -> Result<(), EvalError> {
    if image.h != label.h || image.w != label.w {
        return Err(EvalError::DimMismatch { ph: image.h, pw: image.w, th: label.h, tw: label.w });
    }
    let bytes = image.to_u8();
    let mut data = Vec::with_capacity(bytes.len() * 3);
    for (&g, &l) in bytes.iter().zip(&label.data) {
        let rgb = match l {
            0 => [g, g, g],
            1 => [255, 0, 0],
            2 => [0, 255, 0],
            3 => [0, 0, 255],
            other => return Err(EvalError::BadLabel { label: other }),
        };
        data.extend_from_slice(&rgb);
    }
    write_ppm(path, &Ppm { w: image.w, h: image.h, data })?;
    Ok(())
}

impl IouReport {
    /// Pretty JSON with a stable key schema.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Fixed-width table for terminals and logs.
    pub fn to_text(&self) -> String {
        let names = ["background", "chrom_a", "chrom_b", "overlap"];
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.4}"),
            None => "  n/a ".to_string(),
        };
        let mut out = String::new();
        out.push_str("class        global_iou  mean_iou\n");
        for (k, name) in names.iter().enumerate() {
            out.push_str(&format!(
                "{:<12} {:>10}  {:>8}\n",
                name,
                fmt(self.per_class_global[k]),
                fmt(self.per_class_mean[k])
            ));
        }
        out.push_str("\nconfusion (rows = truth, cols = predicted):\n");
        out.push_str("    ");
        for short in ["bg", "1", "2", "3"] {
            out.push_str(&format!(" {short:>12}"));
        }
        out.push('\n');
        for (row, short) in self.confusion.iter().zip(["bg", "1", "2", "3"]) {
            out.push_str(&format!("{short:<4}"));
            for count in row {
                out.push_str(&format!(" {count:>12}"));
            }
            out.push('\n');
        }
        out
    }
}
