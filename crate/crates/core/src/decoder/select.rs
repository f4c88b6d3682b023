use serde::{Deserialize, Serialize};

use super::epoch::{Epoch, FeatureMatrix};
use super::{CHANNELS, FEATURE_WINDOWS};
use crate::bandit::ActionId;
use crate::error::{Error, Result};
use crate::stats::{mean, median, quantile_sorted, sample_variance};

/// Binary class: 0 = mismatching expectation, 1 = matching expectation.
pub type Label = u8;

/// Splits scores at their sample median: below -> 0, above -> 1.
///
/// Scores equal to the median are visited in input order and each one joins
/// whichever class is currently smaller (class 0 when equal), so the final
/// class sizes differ by at most one.
pub fn median_split(scores: &[f64]) -> Result<(Vec<Label>, f64)> {
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "median split needs >= 2 scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("median split scores".into()));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate(format!("all {} scores equal {lo}", scores.len())));
    }
    let threshold = median(scores);
    let mut labels: Vec<Option<Label>> = scores
        .iter()
        .map(|&s| match s.partial_cmp(&threshold) {
            Some(std::cmp::Ordering::Less) => Some(0),
            Some(std::cmp::Ordering::Greater) => Some(1),
            _ => None,
        })
        .collect();
    let mut counts = [0usize; 2];
    for l in labels.iter().flatten() {
        counts[*l as usize] += 1;
    }
    for l in labels.iter_mut().filter(|l| l.is_none()) {
        let class = if counts[1] < counts[0] { 1 } else { 0 };
        counts[class as usize] += 1;
        *l = Some(class);
    }
    Ok((labels.into_iter().map(|l| l.unwrap_or(0)).collect(), threshold))
}

/// Tukey fences with type-7 quartiles: `v` is an outlier iff
/// `v < Q1 - k IQR` or `v > Q3 + k IQR`. Fewer than four values are never
/// flagged.
pub fn tukey_mask(values: &[f64], k: f64) -> Vec<bool> {
    if values.len() < 4 {
        return vec![false; values.len()];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
    values.iter().map(|&v| v < lo || v > hi).collect()
}

/// Flags (true = reject) every epoch with any |sample| above `threshold_uv`.
pub fn amplitude_reject(epochs: &[Epoch], threshold_uv: f64) -> Vec<bool> {
    epochs.iter().map(|e| e.max_abs() > threshold_uv).collect()
}

/// Featurized trials with binary labels from a median split of their ratings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: Vec<FeatureMatrix>,
    pub labels: Vec<Label>,
    pub split_threshold: f64,
    pub trial_ids: Vec<u64>,
    pub conditions: Vec<ActionId>,
    pub raw_scores: Vec<f64>,
}

impl LabeledDataset {
    /// Labels the trials by median split of `raw_scores`.
    pub fn from_scores(
        features: Vec<FeatureMatrix>,
        trial_ids: Vec<u64>,
        conditions: Vec<ActionId>,
        raw_scores: Vec<f64>,
    ) -> Result<Self> {
        let (labels, split_threshold) = median_split(&raw_scores)?;
        Self::with_labels(features, labels, split_threshold, trial_ids, conditions, raw_scores)
    }

    pub fn with_labels(
        features: Vec<FeatureMatrix>,
        labels: Vec<Label>,
        split_threshold: f64,
        trial_ids: Vec<u64>,
        conditions: Vec<ActionId>,
        raw_scores: Vec<f64>,
    ) -> Result<Self> {
        let n = features.len();
        if [labels.len(), trial_ids.len(), conditions.len(), raw_scores.len()]
            .iter()
            .any(|&l| l != n)
        {
            return Err(Error::Shape("dataset columns have different lengths".into()));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::Shape(format!("trial {}: label must be 0 or 1", trial_ids[i])));
        }
        Ok(Self {
            features,
            labels,
            split_threshold,
            trial_ids,
            conditions,
            raw_scores,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            trials: self.len(),
            class_counts: self.class_counts(),
            split_threshold: self.split_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub trials: usize,
    pub class_counts: [usize; 2],
    pub split_threshold: f64,
}

/// |Welch t| for every feature over all trials of the dataset.
pub fn feature_tstats(dataset: &LabeledDataset) -> Result<Vec<f64>> {
    let rows: Vec<usize> = (0..dataset.len()).collect();
    feature_tstats_rows(&dataset.features, &dataset.labels, &rows)
}

/// |Welch t| per feature restricted to `rows`, flat channel-major order.
///
/// A feature with zero variance in both classes gets 0 when the class means
/// agree and +inf otherwise.
pub fn feature_tstats_rows(features: &[FeatureMatrix], labels: &[Label], rows: &[usize]) -> Result<Vec<f64>> {
    let (ones, zeros): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| labels[r] == 1);
    if zeros.len() < 2 || ones.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t statistics need >= 2 trials per class, got {} / {}",
            zeros.len(),
            ones.len()
        )));
    }
    let nfeat = CHANNELS * FEATURE_WINDOWS;
    let mut out = Vec::with_capacity(nfeat);
    let mut a = Vec::with_capacity(zeros.len());
    let mut b = Vec::with_capacity(ones.len());
    for f in 0..nfeat {
        a.clear();
        b.clear();
        a.extend(zeros.iter().map(|&r| features[r].values()[f]));
        b.extend(ones.iter().map(|&r| features[r].values()[f]));
        out.push(welch_t(&a, &b).abs());
    }
    Ok(out)
}

/// Welch's two-sample t statistic `(mean(b) - mean(a)) / sqrt(va/na + vb/nb)`.
pub fn welch_t(a: &[f64], b: &[f64]) -> f64 {
    let diff = mean(b) - mean(a);
    let se2 = sample_variance(a) / a.len() as f64 + sample_variance(b) / b.len() as f64;
    if se2 > 0.0 {
        diff / se2.sqrt()
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_split_basic() {
        let (labels, thr) = median_split(&[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(labels, vec![0, 0, 1, 1]);
        assert_eq!(thr, 0.5);
    }

    #[test]
    fn median_split_ties_balance() {
        let (labels, thr) = median_split(&[0.1, 0.5, 0.5, 0.9]).unwrap();
        assert_eq!(thr, 0.5);
        assert_eq!(labels, vec![0, 0, 1, 1]);
        let (labels, _) = median_split(&[0.3, 0.3, 0.3, 0.3, 0.9]).unwrap();
        let ones = labels.iter().filter(|&&l| l == 1).count();
        assert!(ones == 2 || ones == 3);
    }

    #[test]
    fn median_split_degenerate() {
        assert!(matches!(median_split(&[0.3, 0.3, 0.3]), Err(Error::Degenerate(_))));
        assert!(median_split(&[0.3]).is_err());
    }

    #[test]
    fn tukey_examples() {
        assert_eq!(
            tukey_mask(&[1.0, 2.0, 3.0, 4.0, 100.0], 1.5),
            vec![false, false, false, false, true]
        );
        assert_eq!(tukey_mask(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.5), vec![false; 5]);
        assert_eq!(tukey_mask(&[2.0; 6], 1.5), vec![false; 6]);
    }

    #[test]
    fn amplitude_threshold() {
        let mut kept = Epoch::zeros(1, ActionId::VISUAL);
        kept.channel_mut(3)[10] = -99.9;
        let mut rejected = Epoch::zeros(2, ActionId::VISUAL);
        rejected.channel_mut(60)[200] = 150.0;
        assert_eq!(amplitude_reject(&[kept, rejected], 100.0), vec![false, true]);
        assert!(amplitude_reject(&[], 100.0).is_empty());
    }

    #[test]
    fn closed_form_welch() {
        // class means -1 / +1, sd 0.1, n = 35: t = 2 / sqrt(2 * 0.01 / 35) ~ 83.7
        let a: Vec<f64> = (0..35).map(|i| -1.0 + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 2.0).collect();
        let t = welch_t(&a, &b);
        let sd = sample_variance(&a).sqrt();
        let expect = 2.0 / (2.0 * sd * sd / 35.0).sqrt();
        assert!((t - expect).abs() < 1e-9);
        assert!(t > 50.0);
        assert_eq!(welch_t(&a, &a), 0.0);
    }
}
