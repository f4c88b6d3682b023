//! Seeded batches of independent simulated sessions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisReport, NonConverged, Outcome, StepDifferenceSummary, analyze, drift_correlations, summarize_steps};
use crate::engine::config::ExperimentConfig;
use crate::engine::session::{SessionResult, run_session};
use crate::error::{Error, Result};
use crate::stats::mean;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub explicit_convergence_rate: f64,
    pub implicit_convergence_rate: f64,
    pub explicit_correct_rate: f64,
    pub implicit_correct_rate: f64,
    pub mean_steps_explicit: Option<f64>,
    pub mean_steps_implicit: Option<f64>,
    pub mean_rejected: f64,
    pub mean_selected_features: f64,
    pub mean_cv_f1: f64,
    pub step_difference_imputed: StepDifferenceSummary,
    pub report: AnalysisReport,
}

/// `n` consecutive seeds starting at `base`.
pub fn seed_list(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Runs one session per seed (run `i` uses `seeds[i]` and counterbalancing
/// slot `i`). Results come back in seed order whatever the parallelism;
/// `parallelism = 0` uses all cores.
pub fn run_batch(config: &ExperimentConfig, seeds: &[u64], parallelism: usize) -> Result<Vec<SessionResult>> {
    if seeds.is_empty() {
        return Err(Error::Config("monte carlo needs at least one run".into()));
    }
    config.validate()?;
    let run = |(i, &seed): (usize, &u64)| {
        let cfg = ExperimentConfig {
            seed,
            ..config.clone()
        };
        run_session(&cfg, Some(i))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().enumerate().map(run).collect())
}

fn mean_opt(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| mean(v))
}

pub fn summarize(seeds: &[u64], results: &[SessionResult]) -> MonteCarloSummary {
    let n = results.len().max(1) as f64;
    let rate = |f: &dyn Fn(&SessionResult) -> bool| results.iter().filter(|r| f(r)).count() as f64 / n;
    let outcomes: Vec<_> = results.iter().map(SessionResult::outcome).collect();
    let drift: Vec<_> = results.iter().map(|r| drift_correlations(&r.training_log)).collect();
    let steps_e: Vec<f64> = results.iter().filter_map(|r| r.steps_explicit.map(|s| s as f64)).collect();
    let steps_i: Vec<f64> = results.iter().filter_map(|r| r.steps_implicit.map(|s| s as f64)).collect();
    MonteCarloSummary {
        runs: results.len(),
        seeds: seeds.to_vec(),
        explicit_convergence_rate: rate(&|r| r.explicit_outcome != Outcome::NotConverged),
        implicit_convergence_rate: rate(&|r| r.implicit_outcome != Outcome::NotConverged),
        explicit_correct_rate: rate(&|r| r.explicit_outcome == Outcome::ConvergedCorrect),
        implicit_correct_rate: rate(&|r| r.implicit_outcome == Outcome::ConvergedCorrect),
        mean_steps_explicit: mean_opt(&steps_e),
        mean_steps_implicit: mean_opt(&steps_i),
        mean_rejected: results.iter().map(|r| (r.rejected_amplitude + r.rejected_behavior) as f64).sum::<f64>() / n,
        mean_selected_features: results.iter().map(|r| r.bundle.n_features as f64).sum::<f64>() / n,
        mean_cv_f1: results.iter().map(|r| r.bundle.cv_f1).sum::<f64>() / n,
        step_difference_imputed: summarize_steps(&outcomes, NonConverged::ImputeMax),
        report: analyze(&outcomes, &drift, NonConverged::Exclude),
    }
}

pub fn monte_carlo(config: &ExperimentConfig, seeds: &[u64], parallelism: usize) -> Result<(Vec<SessionResult>, MonteCarloSummary)> {
    let results = run_batch(config, seeds, parallelism)?;
    let summary = summarize(seeds, &results);
    Ok((results, summary))
}
