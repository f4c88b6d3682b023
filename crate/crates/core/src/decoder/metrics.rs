use serde::{Deserialize, Serialize};

use super::select::Label;
use crate::error::{Error, Result};

/// Scores at or above this value count as class 1.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1: f64,
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub roc_points: Vec<(f64, f64)>,
    pub auc: f64,
}

pub fn compute_metrics(scores: &[f64], labels: &[Label]) -> Result<MetricsReport> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("metric scores".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("metrics need both classes present".into()));
    }

    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= DECISION_THRESHOLD, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let correct = tp + (neg - fp);
    let accuracy = correct as f64 / labels.len() as f64;
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fneg) as f64
    };

    let roc_points = roc_curve(scores, labels, pos, neg);
    let auc = roc_points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(MetricsReport {
        accuracy,
        f1,
        roc_points,
        auc,
    })
}

/// Sweeps the threshold down through every distinct score; tied scores move
/// the curve diagonally in one step.
fn roc_curve(scores: &[f64], labels: &[Label], pos: usize, neg: usize) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    points
}
