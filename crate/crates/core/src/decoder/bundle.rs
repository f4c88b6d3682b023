use std::path::Path;

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::epoch::{Epoch, FeatureIndex, FeatureMatrix, Preprocessor};
use super::lda::{LdaModel, fit_lda};
use super::metrics::{MetricsReport, compute_metrics};
use super::select::{Label, LabeledDataset, feature_tstats_rows};
use super::{BAND_HI_HZ, BAND_LO_HZ, SAMPLING_RATE_HZ};
use crate::bandit::{Reward, RewardSource};
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSearchConfig {
    /// Features kept after ranking by |t|.
    pub top_k: usize,
    pub min_features: usize,
    pub max_features: usize,
    pub step: usize,
    pub test_fraction: f64,
    pub min_per_class: usize,
    pub norm_lo_percentile: f64,
    pub norm_hi_percentile: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            top_k: 100,
            min_features: 10,
            max_features: 100,
            step: 5,
            test_fraction: 0.2,
            min_per_class: 20,
            norm_lo_percentile: 0.05,
            norm_hi_percentile: 0.95,
        }
    }
}

impl GridSearchConfig {
    pub fn candidates(&self) -> impl Iterator<Item = usize> + '_ {
        (self.min_features..=self.max_features.min(self.top_k)).step_by(self.step.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n_features: usize,
    pub holdout_accuracy: f64,
}

/// A fitted implicit-feedback decoder. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderBundle {
    pub selected_features: Vec<FeatureIndex>,
    pub lda_weights: Vec<f64>,
    pub lda_bias: f64,
    pub shrinkage_lambda: f64,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub cv_accuracy: f64,
    pub cv_f1: f64,
    pub holdout_metrics: MetricsReport,
    pub grid: Vec<GridPoint>,
    pub train_trial_ids: Vec<u64>,
    pub holdout_trial_ids: Vec<u64>,
    pub band_hz: (f64, f64),
    pub sampling_rate_hz: f64,
    pub config_fingerprint: String,
    pub created_at_unix_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub n_features: usize,
    pub selected_features: Vec<FeatureIndex>,
    pub shrinkage_lambda: f64,
    pub norm_lo: f64,
    pub norm_hi: f64,
    pub cv_accuracy: f64,
    pub cv_f1: f64,
    pub auc: f64,
}

impl DecoderBundle {
    pub fn summary(&self) -> BundleSummary {
        BundleSummary {
            n_features: self.selected_features.len(),
            selected_features: self.selected_features.clone(),
            shrinkage_lambda: self.shrinkage_lambda,
            norm_lo: self.norm_lo,
            norm_hi: self.norm_hi,
            cv_accuracy: self.cv_accuracy,
            cv_f1: self.cv_f1,
            auc: self.holdout_metrics.auc,
        }
    }

    pub fn raw_score(&self, features: &FeatureMatrix) -> f64 {
        let x = features.gather(&self.selected_features);
        self.lda_weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.lda_bias
    }

    pub fn normalize_score(&self, raw: f64) -> f64 {
        normalize_score(self, raw)
    }

    /// Filter, featurize, project and normalize one epoch.
    pub fn score_epoch(&self, epoch: &Epoch) -> Result<Reward> {
        self.score_epoch_with(&Preprocessor::new(), epoch)
    }

    pub fn score_epoch_with(&self, pre: &Preprocessor, epoch: &Epoch) -> Result<Reward> {
        let features = pre.features(epoch)?;
        Reward::new(self.normalize_score(self.raw_score(&features)), RewardSource::Implicit)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: DecoderBundle = serde_json::from_str(s)?;
        if !(b.norm_lo < b.norm_hi) {
            return Err(Error::Degenerate(format!("bundle anchors {} >= {}", b.norm_lo, b.norm_hi)));
        }
        if b.lda_weights.len() != b.selected_features.len() {
            return Err(Error::Shape("bundle weight count differs from feature count".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// `(raw - lo) / (hi - lo)` clamped to [0, 1].
pub fn normalize_score(bundle: &DecoderBundle, raw: f64) -> f64 {
    let v = (raw - bundle.norm_lo) / (bundle.norm_hi - bundle.norm_lo);
    if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }
}

/// Per-class shuffled split; each class contributes `round(frac * n_class)`
/// (at least one) rows to the held-out set. Both index lists are sorted.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[Label], test_fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(rng);
        let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len());
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

pub fn grid_search_fit<R: Rng + ?Sized>(dataset: &LabeledDataset, rng: &mut R) -> Result<DecoderBundle> {
    grid_search_fit_with(dataset, &GridSearchConfig::default(), rng)
}

pub fn grid_search_fit_with<R: Rng + ?Sized>(
    dataset: &LabeledDataset,
    config: &GridSearchConfig,
    rng: &mut R,
) -> Result<DecoderBundle> {
    let counts = dataset.class_counts();
    if counts[0] < config.min_per_class || counts[1] < config.min_per_class {
        return Err(Error::InsufficientData(format!(
            "need >= {} trials per class, got {} / {}",
            config.min_per_class, counts[0], counts[1]
        )));
    }
    let (train, test) = stratified_split(&dataset.labels, config.test_fraction, rng);
    for (name, rows) in [("training", &train), ("held-out", &test)] {
        for class in [0u8, 1] {
            if !rows.iter().any(|&r| dataset.labels[r] == class) {
                return Err(Error::InsufficientData(format!("{name} split has no class-{class} trials")));
            }
        }
    }

    let tstats = feature_tstats_rows(&dataset.features, &dataset.labels, &train)?;
    let mut ranked: Vec<usize> = (0..tstats.len()).collect();
    ranked.sort_by(|&a, &b| tstats[b].total_cmp(&tstats[a]).then(a.cmp(&b)));
    ranked.truncate(config.top_k);

    let rows_of = |rows: &[usize], feats: &[FeatureIndex]| -> Vec<Vec<f64>> {
        rows.iter().map(|&r| dataset.features[r].gather(feats)).collect()
    };
    let train_y: Vec<Label> = train.iter().map(|&r| dataset.labels[r]).collect();
    let test_y: Vec<Label> = test.iter().map(|&r| dataset.labels[r]).collect();

    let mut grid = Vec::new();
    let mut best: Option<(f64, Vec<FeatureIndex>, LdaModel)> = None;
    for n in config.candidates() {
        let feats: Vec<FeatureIndex> = ranked[..n.min(ranked.len())]
            .iter()
            .map(|&i| FeatureIndex::from_flat(i))
            .collect();
        let model = fit_lda(&rows_of(&train, &feats), &train_y)?;
        let test_x = rows_of(&test, &feats);
        let correct = test_x.iter().zip(&test_y).filter(|(x, y)| model.predict(x) == **y).count();
        let acc = correct as f64 / test.len() as f64;
        grid.push(GridPoint {
            n_features: n,
            holdout_accuracy: acc,
        });
        if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
            best = Some((acc, feats, model));
        }
    }
    let (_, selected_features, model) =
        best.ok_or_else(|| Error::Config("grid search has no candidate feature counts".into()))?;

    let test_x = rows_of(&test, &selected_features);
    let mut raw: Vec<f64> = test_x.iter().map(|x| model.score(x)).collect();
    let holdout_raw = raw.clone();
    raw.sort_by(f64::total_cmp);
    let norm_lo = quantile_sorted(&raw, config.norm_lo_percentile);
    let norm_hi = quantile_sorted(&raw, config.norm_hi_percentile);
    if !(norm_lo < norm_hi) {
        return Err(Error::Degenerate(format!(
            "held-out LDA scores collapse: anchors {norm_lo} / {norm_hi}"
        )));
    }

    let mut bundle = DecoderBundle {
        selected_features,
        lda_weights: model.weights,
        lda_bias: model.bias,
        shrinkage_lambda: model.shrinkage,
        norm_lo,
        norm_hi,
        cv_accuracy: 0.0,
        cv_f1: 0.0,
        holdout_metrics: MetricsReport {
            accuracy: 0.0,
            f1: 0.0,
            roc_points: Vec::new(),
            auc: 0.0,
        },
        grid,
        train_trial_ids: train.iter().map(|&r| dataset.trial_ids[r]).collect(),
        holdout_trial_ids: test.iter().map(|&r| dataset.trial_ids[r]).collect(),
        band_hz: (BAND_LO_HZ, BAND_HI_HZ),
        sampling_rate_hz: SAMPLING_RATE_HZ,
        config_fingerprint: fingerprint(config, dataset),
        created_at_unix_ms: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64),
    };
    let normalized: Vec<f64> = holdout_raw.iter().map(|&r| normalize_score(&bundle, r)).collect();
    let metrics = compute_metrics(&normalized, &test_y)?;
    bundle.cv_accuracy = metrics.accuracy;
    bundle.cv_f1 = metrics.f1;
    bundle.holdout_metrics = metrics;
    Ok(bundle)
}

fn fingerprint(config: &GridSearchConfig, dataset: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).unwrap_or_default());
    h.update(format!("band={BAND_LO_HZ}-{BAND_HI_HZ};fs={SAMPLING_RATE_HZ};"));
    for id in &dataset.trial_ids {
        h.update(id.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::ActionId;
    use crate::decoder::{CHANNELS, FEATURE_WINDOWS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn planted(n: usize, effect: f64, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = (i % 2) as u8;
            let mut v: Vec<f64> = (0..CHANNELS * FEATURE_WINDOWS)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            if l == 1 {
                for f in [206, 207, 208, 209] {
                    v[f] += effect;
                }
            }
            feats.push(FeatureMatrix::from_values(v).unwrap());
            labels.push(l);
        }
        let ids = (0..n as u64).collect();
        let conds = vec![ActionId::VISUAL; n];
        let scores = labels.iter().map(|&l| l as f64).collect();
        LabeledDataset::with_labels(feats, labels, 0.5, ids, conds, scores).unwrap()
    }

    fn bundle_with_anchors(lo: f64, hi: f64) -> DecoderBundle {
        let ds = planted(60, 3.0, 1);
        let mut b = grid_search_fit(&ds, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        b.norm_lo = lo;
        b.norm_hi = hi;
        b
    }

    #[test]
    fn normalization_anchors() {
        let b = bundle_with_anchors(-2.0, 4.0);
        assert_eq!(b.normalize_score(-2.0), 0.0);
        assert_eq!(b.normalize_score(4.0), 1.0);
        assert_eq!(b.normalize_score(1.0), 0.5);
        assert_eq!(b.normalize_score(-100.0), 0.0);
        assert_eq!(b.normalize_score(100.0), 1.0);
    }

    #[test]
    fn separable_fixture_fits_well() {
        let ds = planted(140, 3.0, 2);
        let b = grid_search_fit(&ds, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(b.cv_accuracy >= 0.95, "{}", b.cv_accuracy);
        assert!(b.norm_lo < b.norm_hi);
        let n = b.selected_features.len();
        assert!((10..=100).contains(&n) && n % 5 == 0);
        assert_eq!(b.grid.len(), 19);
    }

    #[test]
    fn splits_are_disjoint_and_stratified() {
        let ds = planted(124, 1.0, 3);
        let b = grid_search_fit(&ds, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut all: Vec<u64> = b.train_trial_ids.iter().chain(&b.holdout_trial_ids).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..124).collect::<Vec<_>>());
        assert!(b.holdout_trial_ids.len() >= 24 && b.holdout_trial_ids.len() <= 26);
    }

    #[test]
    fn too_few_trials_per_class() {
        let ds = planted(30, 1.0, 3);
        assert!(matches!(
            grid_search_fit(&ds, &mut ChaCha8Rng::seed_from_u64(4)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let ds = planted(80, 1.5, 5);
        let b = grid_search_fit(&ds, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let back = DecoderBundle::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        for f in &ds.features {
            assert_eq!(back.raw_score(f).to_bits(), b.raw_score(f).to_bits());
        }
    }
}
