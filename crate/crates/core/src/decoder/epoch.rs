use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::filter::BandPass;
use super::{BAND_HI_HZ, BAND_LO_HZ, CHANNELS, FEATURE_WINDOWS, SAMPLES, SAMPLING_RATE_HZ};
use crate::bandit::ActionId;
use crate::error::{Error, Result};

/// Windows of 50 ms covering 0..600 ms after the grab.
pub const RAW_WINDOWS: usize = 12;
/// Leading windows dropped after baseline subtraction (0-50 and 50-100 ms).
pub const DROPPED_WINDOWS: usize = 2;

/// One second of 64-channel EEG starting at the grab event, in microvolts.
/// Samples are stored channel-major: `samples[ch * SAMPLES + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    samples: Vec<f64>,
    pub trial_id: u64,
    pub condition: ActionId,
    pub raw_score: f64,
}

impl Epoch {
    pub fn new(samples: Vec<f64>, trial_id: u64, condition: ActionId, raw_score: f64) -> Result<Self> {
        if samples.len() != CHANNELS * SAMPLES {
            return Err(Error::Shape(format!(
                "trial {trial_id}: epoch must hold {CHANNELS}x{SAMPLES} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("trial {trial_id}: epoch contains non-finite samples")));
        }
        Ok(Self {
            samples,
            trial_id,
            condition,
            raw_score,
        })
    }

    pub fn zeros(trial_id: u64, condition: ActionId) -> Self {
        Self {
            samples: vec![0.0; CHANNELS * SAMPLES],
            trial_id,
            condition,
            raw_score: 0.5,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.samples[ch * SAMPLES..(ch + 1) * SAMPLES]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.samples[ch * SAMPLES..(ch + 1) * SAMPLES]
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Index of one decoder feature: channel and post-baseline window
/// (window `w` spans `100 + 50 w .. 150 + 50 w` ms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureIndex {
    pub channel: usize,
    pub window: usize,
}

impl FeatureIndex {
    pub fn flat(self) -> usize {
        self.channel * FEATURE_WINDOWS + self.window
    }

    pub fn from_flat(i: usize) -> Self {
        Self {
            channel: i / FEATURE_WINDOWS,
            window: i % FEATURE_WINDOWS,
        }
    }

    pub fn window_start_ms(self) -> u32 {
        100 + 50 * self.window as u32
    }
}

/// 64 x 10 baseline-corrected window means, channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != CHANNELS * FEATURE_WINDOWS {
            return Err(Error::Shape(format!(
                "feature matrix must hold {CHANNELS}x{FEATURE_WINDOWS} values, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn get(&self, channel: usize, window: usize) -> f64 {
        self.values[channel * FEATURE_WINDOWS + window]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gather(&self, idx: &[FeatureIndex]) -> Vec<f64> {
        idx.iter().map(|f| self.values[f.flat()]).collect()
    }
}

/// Sample range of raw window `w` (0..12). A 50 ms window is 12.5 samples at
/// 250 Hz, so window `w` covers `floor(12.5 w) .. floor(12.5 (w + 1))`,
/// alternating 12 and 13 samples and partitioning samples 0..150 exactly.
pub fn window_samples(w: usize) -> Range<usize> {
    (w * 25) / 2..((w + 1) * 25) / 2
}

/// Mean per raw window, baseline (window 0) subtracted, first two windows
/// dropped. Expects an already filtered epoch.
pub fn featurize(epoch: &Epoch) -> FeatureMatrix {
    let mut values = Vec::with_capacity(CHANNELS * FEATURE_WINDOWS);
    for ch in 0..CHANNELS {
        let x = epoch.channel(ch);
        let window_mean = |w: usize| {
            let r = window_samples(w);
            let len = r.len() as f64;
            x[r].iter().sum::<f64>() / len
        };
        let baseline = window_mean(0);
        values.extend((DROPPED_WINDOWS..RAW_WINDOWS).map(|w| window_mean(w) - baseline));
    }
    FeatureMatrix { values }
}

/// Per-channel band-pass with the decoder's fixed band.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    band: BandPass,
}

impl Preprocessor {
    pub fn new() -> Self {
        Self {
            band: BandPass::new(SAMPLES, SAMPLING_RATE_HZ, BAND_LO_HZ, BAND_HI_HZ)
                .expect("decoder band is valid"),
        }
    }

    pub fn filter(&self, epoch: &Epoch) -> Result<Epoch> {
        let mut out = epoch.clone();
        for ch in 0..CHANNELS {
            self.band.apply_into(epoch.channel(ch), out.channel_mut(ch))?;
        }
        Ok(out)
    }

    pub fn features(&self, epoch: &Epoch) -> Result<FeatureMatrix> {
        Ok(featurize(&self.filter(epoch)?))
    }
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::new()
    }
}
