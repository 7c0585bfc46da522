//! Bin-wise accuracy of a thresholded mask against the oracle mask.

use crate::mask::Mask;
use crate::metrics::MetricError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskAccuracy {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Thresholds the prediction at `threshold` (strictly greater counts as 1)
/// and compares bin-wise against the oracle mask.
pub fn mask_accuracy(pred: &Mask, ibm: &Mask, threshold: f32) -> Result<MaskAccuracy, MetricError> {
    if pred.dim() != ibm.dim() {
        return Err(MetricError::MaskShapeMismatch {
            pred: pred.dim(),
            ibm: ibm.dim(),
        });
    }
    let (mut tp, mut tn, mut fp, mut fne) = (0u64, 0u64, 0u64, 0u64);
    for (&p, &t) in pred.values().iter().zip(ibm.values().iter()) {
        let p = p > threshold;
        let t = t > 0.5;
        match (p, t) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
        }
    }
    let total = (tp + tn + fp + fne) as f64;
    let accuracy = (tp + tn) as f64 / total;
    let precision = if tp + fp == 0 {
        if tp + fne == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fne == 0 {
        1.0
    } else {
        tp as f64 / (tp + fne) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MaskAccuracy {
        accuracy,
        precision,
        recall,
        f1,
    })
}
