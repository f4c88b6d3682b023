//! Simulated participants: a slider rater with noise, time-on-task drift and
//! centre anchoring, and a synthetic EEG generator that plants a late
//! class-dependent ERP so the real decoder can act as the implicit channel.

pub mod montage;

use std::f64::consts::PI;

use rand::{Rng, RngExt};
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bandit::{ActionId, NUM_ACTIONS, Reward, RewardSource};
use crate::decoder::{CHANNELS, DecoderBundle, Epoch, Label, Preprocessor, SAMPLES, SAMPLING_RATE_HZ};
use crate::error::{Error, Result};

pub use montage::{channel_index, channel_label, montage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMode {
    Graded,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceProfile {
    /// True mean rating per condition, in [0, 1].
    pub mean_score: [f64; NUM_ACTIONS],
    pub rating_sd: f64,
    /// Rating change per trial.
    pub drift_slope: [f64; NUM_ACTIONS],
    /// Fraction of the distance to 0.5 removed from each rating.
    pub anchor_pull: f64,
    pub response_mode: ResponseMode,
    /// Log-space sd of the per-trial placement error (behavioral outlier proxy).
    pub placement_sigma: f64,
}

impl Default for PreferenceProfile {
    fn default() -> Self {
        Self {
            mean_score: [0.5, 0.4, 0.7, 0.6],
            rating_sd: 0.1,
            drift_slope: [0.0; NUM_ACTIONS],
            anchor_pull: 0.0,
            response_mode: ResponseMode::Graded,
            placement_sigma: 1.0,
        }
    }
}

impl PreferenceProfile {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("profile.{m}")));
        if let Some(m) = self.mean_score.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return fail(format!("mean_score entry {m} outside [0, 1]"));
        }
        if !(self.rating_sd >= 0.0 && self.rating_sd.is_finite()) {
            return fail("rating_sd must be finite and >= 0".into());
        }
        if self.drift_slope.iter().any(|d| !d.is_finite()) {
            return fail("drift_slope must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.anchor_pull) {
            return fail("anchor_pull must lie in [0, 1]".into());
        }
        if !(self.placement_sigma >= 0.0 && self.placement_sigma.is_finite()) {
            return fail("placement_sigma must be finite and >= 0".into());
        }
        let best = self.best_condition();
        let ties = self
            .mean_score
            .iter()
            .filter(|&&m| m == self.mean_score[best.index()])
            .count();
        if ties > 1 {
            return fail("mean_score must have a unique maximum".into());
        }
        Ok(())
    }

    pub fn best_condition(&self) -> ActionId {
        let mut best = 0;
        for i in 1..NUM_ACTIONS {
            if self.mean_score[i] > self.mean_score[best] {
                best = i;
            }
        }
        ActionId::ALL[best]
    }

    pub fn drifted_mean(&self, condition: ActionId, t: u64) -> f64 {
        self.mean_score[condition.index()] + self.drift_slope[condition.index()] * t as f64
    }

    /// Median of the drifted per-condition means at trial `t`; conditions
    /// above it are "matching".
    pub fn class_threshold(&self, t: u64) -> f64 {
        let means = ActionId::ALL.map(|a| self.drifted_mean(a, t));
        crate::stats::median(&means)
    }

    /// Latent expectation class of a condition at trial `t`, before label noise.
    pub fn latent_class(&self, condition: ActionId, t: u64) -> Label {
        u8::from(self.drifted_mean(condition, t) > self.class_threshold(t))
    }
}

/// A channel given either by montage label or by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelRef {
    Index(usize),
    Label(String),
}

impl ChannelRef {
    pub fn resolve(&self) -> Result<usize> {
        match self {
            ChannelRef::Index(i) if *i < CHANNELS => Ok(*i),
            ChannelRef::Index(i) => Err(Error::Config(format!("erp.effect_channels: index {i} >= {CHANNELS}"))),
            ChannelRef::Label(l) => {
                channel_index(l).ok_or_else(|| Error::Config(format!("erp.effect_channels: unknown channel {l:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErpModel {
    pub effect_channels: Vec<ChannelRef>,
    pub effect_window_ms: (f64, f64),
    /// Peak of the class-1 raised-cosine deflection.
    pub effect_amplitude_uv: f64,
    pub background_noise_sd_uv: f64,
    /// Amplitude of the ongoing 10 Hz oscillation.
    pub alpha_band_amp_uv: f64,
    /// Probability that the implicit channel's true class is flipped.
    pub label_noise: f64,
    /// Probability that a simulated training epoch carries a blink artifact.
    pub artifact_rate: f64,
    pub artifact_amplitude_uv: f64,
}

impl Default for ErpModel {
    fn default() -> Self {
        Self {
            effect_channels: ["TP10", "T8", "FT8", "F6", "CP5"]
                .iter()
                .map(|s| ChannelRef::Label((*s).to_string()))
                .collect(),
            effect_window_ms: (400.0, 550.0),
            effect_amplitude_uv: 4.0,
            background_noise_sd_uv: 10.0,
            alpha_band_amp_uv: 5.0,
            label_noise: 0.1,
            artifact_rate: 0.03,
            artifact_amplitude_uv: 250.0,
        }
    }
}

impl ErpModel {
    pub fn validate(&self) -> Result<()> {
        self.channel_indices()?;
        let (lo, hi) = self.effect_window_ms;
        if !(100.0 <= lo && lo < hi && hi <= 600.0) {
            return Err(Error::Config(format!(
                "erp.effect_window_ms ({lo}, {hi}) must lie within 100..600 ms"
            )));
        }
        for (name, v) in [
            ("effect_amplitude_uv", self.effect_amplitude_uv),
            ("background_noise_sd_uv", self.background_noise_sd_uv),
            ("alpha_band_amp_uv", self.alpha_band_amp_uv),
            ("artifact_amplitude_uv", self.artifact_amplitude_uv),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("erp.{name} must be finite")));
            }
        }
        if self.background_noise_sd_uv < 0.0 {
            return Err(Error::Config("erp.background_noise_sd_uv must be >= 0".into()));
        }
        for (name, p) in [("label_noise", self.label_noise), ("artifact_rate", self.artifact_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("erp.{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn channel_indices(&self) -> Result<Vec<usize>> {
        self.effect_channels.iter().map(ChannelRef::resolve).collect()
    }

    /// Raised-cosine bump over the effect window, sampled at 250 Hz.
    fn bump(&self) -> Vec<f64> {
        let (lo, hi) = self.effect_window_ms;
        (0..SAMPLES)
            .map(|i| {
                let ms = i as f64 * 1000.0 / SAMPLING_RATE_HZ;
                if ms < lo || ms > hi {
                    0.0
                } else {
                    0.5 * (1.0 - (2.0 * PI * (ms - lo) / (hi - lo)).cos())
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleOutput {
    pub reward: Reward,
    pub true_class: Label,
    pub trial_index: u64,
}

/// One slider rating: drifted mean plus Gaussian noise, rounded in binary
/// mode, pulled toward 0.5, clamped to [0, 1].
pub fn explicit_rating<R: Rng + ?Sized>(
    profile: &PreferenceProfile,
    condition: ActionId,
    t: u64,
    rng: &mut R,
) -> OracleOutput {
    let z: f64 = StandardNormal.sample(rng);
    let mut v = profile.drifted_mean(condition, t) + profile.rating_sd * z;
    if profile.response_mode == ResponseMode::Binary {
        v = if v >= 0.5 { 1.0 } else { 0.0 };
    }
    v += profile.anchor_pull * (0.5 - v);
    let reward = Reward::new(v.clamp(0.0, 1.0), RewardSource::Explicit).unwrap_or_else(|_| {
        Reward::new(0.5, RewardSource::Explicit).expect("0.5 is a valid reward")
    });
    OracleOutput {
        reward,
        true_class: profile.latent_class(condition, t),
        trial_index: t,
    }
}

/// Synthetic 64 x 250 epoch: white Gaussian background, a 10 Hz oscillation
/// with random phase per channel, and for class 1 a raised-cosine bump on the
/// effect channels over the effect window.
pub fn synth_epoch<R: Rng + ?Sized>(model: &ErpModel, true_class: Label, rng: &mut R) -> Result<Epoch> {
    let channels = model.channel_indices()?;
    let bump = model.bump();
    let mut samples = Vec::with_capacity(CHANNELS * SAMPLES);
    for ch in 0..CHANNELS {
        let phase = rng.random::<f64>() * 2.0 * PI;
        let planted = true_class == 1 && channels.contains(&ch);
        for (i, b) in bump.iter().enumerate() {
            let secs = i as f64 / SAMPLING_RATE_HZ;
            let z: f64 = StandardNormal.sample(rng);
            let mut v = model.background_noise_sd_uv * z + model.alpha_band_amp_uv * (2.0 * PI * 10.0 * secs + phase).sin();
            if planted {
                v += model.effect_amplitude_uv * b;
            }
            samples.push(v);
        }
    }
    Epoch::new(samples, 0, ActionId::VISUAL, 0.5)
}

/// Adds a frontal blink-like deflection (Gaussian, 200 ms wide, centred at a
/// random latency) with probability `artifact_rate`. Returns whether one was added.
pub fn maybe_add_artifact<R: Rng + ?Sized>(model: &ErpModel, epoch: &mut Epoch, rng: &mut R) -> bool {
    let hit = rng.random::<f64>() < model.artifact_rate;
    let centre = rng.random_range(0.2..0.8) * SAMPLES as f64;
    if !hit {
        return false;
    }
    let width = 0.1 * SAMPLING_RATE_HZ;
    for label in ["Fp1", "Fp2", "AF7", "AF8", "AF3", "AF4", "AFz"] {
        let ch = channel_index(label).expect("frontal channel in montage");
        for (i, v) in epoch.channel_mut(ch).iter_mut().enumerate() {
            let d = (i as f64 - centre) / width;
            *v += model.artifact_amplitude_uv * (-0.5 * d * d).exp();
        }
    }
    true
}

/// Per-trial placement error in cm (log-normal, median 1 cm).
pub fn placement_error<R: Rng + ?Sized>(profile: &PreferenceProfile, rng: &mut R) -> f64 {
    LogNormal::new(0.0, profile.placement_sigma)
        .map(|d| d.sample(rng))
        .unwrap_or(1.0)
}

/// Implicit reward: latent class of the condition (flipped with probability
/// `label_noise`), a synthetic epoch of that class, scored by the decoder.
#[allow(clippy::too_many_arguments)]
pub fn implicit_feedback<R: Rng + ?Sized>(
    bundle: &DecoderBundle,
    model: &ErpModel,
    profile: &PreferenceProfile,
    condition: ActionId,
    t: u64,
    rng: &mut R,
) -> Result<OracleOutput> {
    implicit_feedback_with(&Preprocessor::new(), bundle, model, profile, condition, t, rng)
}

#[allow(clippy::too_many_arguments)]
pub fn implicit_feedback_with<R: Rng + ?Sized>(
    pre: &Preprocessor,
    bundle: &DecoderBundle,
    model: &ErpModel,
    profile: &PreferenceProfile,
    condition: ActionId,
    t: u64,
    rng: &mut R,
) -> Result<OracleOutput> {
    let latent = profile.latent_class(condition, t);
    let flip = rng.random::<f64>() < model.label_noise;
    let true_class = if flip { 1 - latent } else { latent };
    let mut epoch = synth_epoch(model, true_class, rng)?;
    epoch.trial_id = t;
    epoch.condition = condition;
    let reward = bundle.score_epoch_with(pre, &epoch)?;
    Ok(OracleOutput {
        reward,
        true_class,
        trial_index: t,
    })
}

/// Everything the simulated participant produces for one training trial.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub rating: OracleOutput,
    pub epoch: Epoch,
    pub placement_error: f64,
    pub artifact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedParticipant {
    pub profile: PreferenceProfile,
    pub erp: ErpModel,
}

impl SimulatedParticipant {
    pub fn training_trial<R: Rng + ?Sized>(&self, condition: ActionId, t: u64, rng: &mut R) -> Result<TrainingSample> {
        let rating = explicit_rating(&self.profile, condition, t, rng);
        let latent = self.profile.latent_class(condition, t);
        let flip = rng.random::<f64>() < self.erp.label_noise;
        let class = if flip { 1 - latent } else { latent };
        let mut epoch = synth_epoch(&self.erp, class, rng)?;
        epoch.trial_id = t;
        epoch.condition = condition;
        epoch.raw_score = rating.reward.value();
        let artifact = maybe_add_artifact(&self.erp, &mut epoch, rng);
        let placement_error = placement_error(&self.profile, rng);
        Ok(TrainingSample {
            rating,
            epoch,
            placement_error,
            artifact,
        })
    }
}
