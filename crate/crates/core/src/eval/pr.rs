use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PRCurve {
    /// One point per threshold, in the order the thresholds were given.
    pub points: Vec<PRPoint>,
    pub auc: f64,
}

/// Precision/recall of the detector "image matches iff its matched-feature
/// count is above the threshold", for each threshold.
///
/// Precision with no detections is taken as 1. The AUC integrates precision
/// over recall with the trapezoid rule on recall-sorted points, so it only
/// covers the recall range the thresholds reach; [`default_thresholds`]
/// reaches both ends.
pub fn pr_curve(counts: &[f64], truth: &[bool], thresholds: &[f64]) -> Result<PRCurve> {
    if counts.len() != truth.len() {
        return Err(Error::input("one ground-truth label per count"));
    }
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Err(Error::input("no positive ground truth; recall undefined"));
    }
    let points: Vec<PRPoint> = thresholds
        .iter()
        .map(|&threshold| {
            let (mut tp, mut fp) = (0usize, 0usize);
            for (&c, &t) in counts.iter().zip(truth) {
                if c > threshold {
                    if t {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            PRPoint {
                threshold,
                precision: if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 },
                recall: tp as f64 / positives as f64,
            }
        })
        .collect();
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| {
        a.recall
            .total_cmp(&b.recall)
            .then(b.precision.total_cmp(&a.precision))
    });
    let auc = sorted
        .windows(2)
        .map(|w| (w[1].recall - w[0].recall) * (w[0].precision + w[1].precision) / 2.0)
        .sum();
    Ok(PRCurve { points, auc })
}

/// Every distinct count, plus one threshold below the smallest count (all
/// detected) and the largest count itself (none detected), ascending.
pub fn default_thresholds(counts: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = counts.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    if let Some(&lo) = t.first() {
        t.insert(0, lo - 1.0);
    }
    t
}
