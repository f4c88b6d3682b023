//! Labeled dataset files: JSON Lines, one trial per line.
//!
//! ```text
//! {"trial_id": 7, "condition": 2, "raw_score": 0.61, "label": 1,
//!  "behavior": 1.3, "epoch": [[...250 floats...], ...64 rows...]}
//! ```
//!
//! `label` and `behavior` are optional. Without labels on every line the
//! trials are labeled by median split of `raw_score`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::epoch::{Epoch, Preprocessor, featurize};
use super::select::{Label, LabeledDataset, amplitude_reject, median_split, tukey_mask};
use super::{CHANNELS, SAMPLES};
use crate::bandit::ActionId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub trial_id: u64,
    pub condition: ActionId,
    pub raw_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<f64>,
    pub epoch: Vec<Vec<f64>>,
}

impl DatasetRecord {
    pub fn from_epoch(epoch: &Epoch, label: Option<Label>, behavior: Option<f64>) -> Self {
        Self {
            trial_id: epoch.trial_id,
            condition: epoch.condition,
            raw_score: epoch.raw_score,
            label,
            behavior,
            epoch: (0..CHANNELS).map(|c| epoch.channel(c).to_vec()).collect(),
        }
    }

    pub fn to_epoch(&self) -> Result<Epoch> {
        if self.epoch.len() != CHANNELS {
            return Err(Error::Shape(format!(
                "trial {}: expected {CHANNELS} channels, got {}",
                self.trial_id,
                self.epoch.len()
            )));
        }
        if let Some((c, row)) = self.epoch.iter().enumerate().find(|(_, r)| r.len() != SAMPLES) {
            return Err(Error::Shape(format!(
                "trial {}: channel {c} has {} samples, expected {SAMPLES}",
                self.trial_id,
                row.len()
            )));
        }
        if let Some(l) = self.label.filter(|&l| l > 1) {
            return Err(Error::Shape(format!("trial {}: label {l} is not 0 or 1", self.trial_id)));
        }
        Epoch::new(self.epoch.concat(), self.trial_id, self.condition, self.raw_score)
    }
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        rec.to_epoch().map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of cleaning and labeling a block of raw epochs.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub dataset: LabeledDataset,
    pub rejected_amplitude: Vec<u64>,
    pub rejected_behavior: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleaningConfig {
    pub amplitude_threshold_uv: f64,
    pub tukey_k: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            amplitude_threshold_uv: 100.0,
            tukey_k: 1.5,
        }
    }
}

/// Filter, reject (amplitude on filtered data, then Tukey fences on the
/// behavioral scalar when given), featurize and label the surviving trials.
/// Labels: the supplied ones when every trial has one, else a median split of
/// the surviving trials' ratings.
pub fn prepare_dataset(
    epochs: &[Epoch],
    behavior: Option<&[f64]>,
    labels: Option<&[Label]>,
    cleaning: CleaningConfig,
) -> Result<PreparedDataset> {
    if behavior.is_some_and(|b| b.len() != epochs.len()) || labels.is_some_and(|l| l.len() != epochs.len()) {
        return Err(Error::Shape("behavior/labels length differs from epoch count".into()));
    }
    let pre = Preprocessor::new();
    let filtered = epochs.iter().map(|e| pre.filter(e)).collect::<Result<Vec<_>>>()?;
    let amp = amplitude_reject(&filtered, cleaning.amplitude_threshold_uv);
    let beh = behavior.map_or_else(|| vec![false; epochs.len()], |b| tukey_mask(b, cleaning.tukey_k));

    let mut rejected_amplitude = Vec::new();
    let mut rejected_behavior = Vec::new();
    let mut keep = Vec::new();
    for (i, e) in filtered.iter().enumerate() {
        if amp[i] {
            rejected_amplitude.push(e.trial_id);
        } else if beh[i] {
            rejected_behavior.push(e.trial_id);
        } else {
            keep.push(i);
        }
    }

    let features = keep.iter().map(|&i| featurize(&filtered[i])).collect();
    let trial_ids = keep.iter().map(|&i| epochs[i].trial_id).collect();
    let conditions = keep.iter().map(|&i| epochs[i].condition).collect();
    let scores: Vec<f64> = keep.iter().map(|&i| epochs[i].raw_score).collect();
    let dataset = match labels {
        Some(l) => {
            let kept: Vec<Label> = keep.iter().map(|&i| l[i]).collect();
            let threshold = if scores.len() >= 2 {
                median_split(&scores).map_or(f64::NAN, |(_, t)| t)
            } else {
                f64::NAN
            };
            LabeledDataset::with_labels(features, kept, threshold, trial_ids, conditions, scores)?
        }
        None => LabeledDataset::from_scores(features, trial_ids, conditions, scores)?,
    };
    Ok(PreparedDataset {
        dataset,
        rejected_amplitude,
        rejected_behavior,
    })
}

/// Reads a dataset file and prepares it for fitting.
pub fn load_prepared(path: &Path, cleaning: CleaningConfig) -> Result<PreparedDataset> {
    let records = read_dataset(path)?;
    let epochs = records.iter().map(DatasetRecord::to_epoch).collect::<Result<Vec<_>>>()?;
    let behavior: Option<Vec<f64>> = records.iter().map(|r| r.behavior).collect();
    let labels: Option<Vec<Label>> = records.iter().map(|r| r.label).collect();
    prepare_dataset(&epochs, behavior.as_deref(), labels.as_deref(), cleaning)
}
