//! Implicit-feedback decoder: EEG epoch preprocessing, windowed ERP
//! features, discriminative feature selection, shrinkage LDA, score
//! normalization and classifier metrics.

pub mod bundle;
pub mod dataset;
pub mod epoch;
pub mod filter;
pub mod lda;
pub mod metrics;
pub mod select;

pub use bundle::{
    BundleSummary, DecoderBundle, GridPoint, GridSearchConfig, grid_search_fit, grid_search_fit_with,
    normalize_score, stratified_split,
};
pub use dataset::{CleaningConfig, DatasetRecord, PreparedDataset, prepare_dataset, read_dataset, write_dataset};
pub use epoch::{Epoch, FeatureIndex, FeatureMatrix, Preprocessor, featurize, window_samples};
pub use filter::{BandPass, bandpass_fft};
pub use lda::{LdaModel, fit_lda, ledoit_wolf};
pub use metrics::{MetricsReport, compute_metrics};
pub use select::{
    DatasetSummary, Label, LabeledDataset, amplitude_reject, feature_tstats, feature_tstats_rows, median_split,
    tukey_mask, welch_t,
};

pub const CHANNELS: usize = 64;
pub const SAMPLES: usize = 250;
pub const SAMPLING_RATE_HZ: f64 = 250.0;
pub const FEATURE_WINDOWS: usize = 10;
pub const BAND_LO_HZ: f64 = 0.1;
pub const BAND_HI_HZ: f64 = 15.0;
