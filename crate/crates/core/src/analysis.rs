//! Post-hoc statistics over session results or session logs: convergence
//! contingency, steps-to-convergence equivalence (TOST), time-on-task drift
//! correlations and one-sample t-tests.
//!
//! p-values come from the Student-t CDF, evaluated through the regularized
//! incomplete beta function (`statrs`).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bandit::{ActionId, NUM_ACTIONS};
use crate::engine::log::{Block, TrialRecord};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, df).map_or(f64::NAN, |d| d.cdf(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("t-test needs n >= 2, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input".into()));
    }
    let sd = sample_sd(values);
    if sd == 0.0 {
        return Err(Error::ZeroVariance(format!("all {} values equal", values.len())));
    }
    Ok((mean(values), sd / (values.len() as f64).sqrt()))
}

pub fn one_sample_ttest(values: &[f64], mu0: f64) -> Result<TTest> {
    let (m, se) = mean_se(values)?;
    let df = (values.len() - 1) as f64;
    let t = (m - mu0) / se;
    let p = (2.0 * (1.0 - student_t_cdf(t.abs(), df))).min(1.0);
    Ok(TTest { t, df, p })
}

/// How each bound's p-value is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueTails {
    /// Textbook TOST: one-sided test against each bound.
    OneSided,
    /// Two-sided test at each bound (the convention used in the study's
    /// report).
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub mean: f64,
    pub df: f64,
    /// `(mean + bound) / se`
    pub t_lower: f64,
    /// `(mean - bound) / se`
    pub t_upper: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub tails: PValueTails,
    pub equivalent: bool,
}

/// Two one-sided tests for equivalence of the mean to 0 within `±bound`.
/// The decision always uses the one-sided tests at 0.05; the reported
/// p-values are two-sided per bound. See [`tost_equivalence_with`].
pub fn tost_equivalence(diffs: &[f64], bound: f64) -> Result<TostResult> {
    tost_equivalence_with(diffs, bound, PValueTails::TwoSided)
}

pub fn tost_equivalence_with(diffs: &[f64], bound: f64, tails: PValueTails) -> Result<TostResult> {
    let (m, se) = mean_se(diffs)?;
    let df = (diffs.len() - 1) as f64;
    let t_lower = (m + bound) / se;
    let t_upper = (m - bound) / se;
    let (p_lower, p_upper) = match tails {
        PValueTails::OneSided => (1.0 - student_t_cdf(t_lower, df), student_t_cdf(t_upper, df)),
        PValueTails::TwoSided => (
            (2.0 * (1.0 - student_t_cdf(t_lower.abs(), df))).min(1.0),
            (2.0 * (1.0 - student_t_cdf(t_upper.abs(), df))).min(1.0),
        ),
    };
    let one_sided = (1.0 - student_t_cdf(t_lower, df), student_t_cdf(t_upper, df));
    Ok(TostResult {
        mean: m,
        df,
        t_lower,
        t_upper,
        p_lower,
        p_upper,
        tails,
        equivalent: one_sided.0 < 0.05 && one_sided.1 < 0.05,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("pearson: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("pearson needs n >= 3, got {}", x.len())));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("pearson input has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    ConvergedCorrect,
    ConvergedIncorrect,
    NotConverged,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::ConvergedCorrect, Outcome::ConvergedIncorrect, Outcome::NotConverged];

    pub fn classify(converged: Option<ActionId>, truth: ActionId) -> Self {
        match converged {
            Some(a) if a == truth => Outcome::ConvergedCorrect,
            Some(_) => Outcome::ConvergedIncorrect,
            None => Outcome::NotConverged,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::ConvergedCorrect => "converged-correct",
            Outcome::ConvergedIncorrect => "converged-incorrect",
            Outcome::NotConverged => "not-converged",
        }
    }
}

/// What the analyses need from one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub truth: ActionId,
    pub explicit_outcome: Outcome,
    pub implicit_outcome: Outcome,
    pub steps_explicit: Option<usize>,
    pub steps_implicit: Option<usize>,
    pub max_trials: usize,
}

/// Per-condition mean of training-block ratings; conditions never seen
/// get NaN.
pub fn training_means(records: &[TrialRecord]) -> [f64; NUM_ACTIONS] {
    let mut sums = [0.0; NUM_ACTIONS];
    let mut counts = [0usize; NUM_ACTIONS];
    for r in records.iter().filter(|r| r.block == Block::Training) {
        sums[r.condition.index()] += r.reward;
        counts[r.condition.index()] += 1;
    }
    std::array::from_fn(|i| if counts[i] > 0 { sums[i] / counts[i] as f64 } else { f64::NAN })
}

/// Condition with the highest mean training rating; ties go to the lowest index.
pub fn truth_from_means(means: &[f64; NUM_ACTIONS]) -> Option<ActionId> {
    let mut best: Option<usize> = None;
    for (i, m) in means.iter().enumerate() {
        if m.is_nan() {
            continue;
        }
        if best.is_none_or(|b| *m > means[b]) {
            best = Some(i);
        }
    }
    best.map(|i| ActionId::ALL[i])
}

fn block_outcome(records: &[TrialRecord], block: Block, truth: ActionId) -> (Outcome, Option<usize>) {
    let recs: Vec<&TrialRecord> = records.iter().filter(|r| r.block == block).collect();
    let converged = recs.last().and_then(|r| r.converged);
    let steps = converged.map(|_| recs.len());
    (Outcome::classify(converged, truth), steps)
}

impl SessionOutcome {
    /// Derives outcomes from a session log. Ground truth is the condition
    /// with the highest mean rating in the log's training block.
    pub fn from_log(records: &[TrialRecord], max_trials: usize) -> Result<Self> {
        let truth = truth_from_means(&training_means(records))
            .ok_or_else(|| Error::InsufficientData("log has no training block; ground truth unknown".into()))?;
        let (explicit_outcome, steps_explicit) = block_outcome(records, Block::Explicit, truth);
        let (implicit_outcome, steps_implicit) = block_outcome(records, Block::Implicit, truth);
        Ok(Self {
            truth,
            explicit_outcome,
            implicit_outcome,
            steps_explicit,
            steps_implicit,
            max_trials,
        })
    }
}

/// Counts indexed `[explicit][implicit]` in [`Outcome::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable(pub [[usize; 3]; 3]);

impl ContingencyTable {
    pub fn get(&self, explicit: Outcome, implicit: Outcome) -> usize {
        self.0[explicit.index()][implicit.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }
}

pub fn contingency<'a>(results: impl IntoIterator<Item = &'a SessionOutcome>) -> ContingencyTable {
    let mut table = [[0usize; 3]; 3];
    for r in results {
        table[r.explicit_outcome.index()][r.implicit_outcome.index()] += 1;
    }
    ContingencyTable(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonConverged {
    /// Drop sessions where either block did not converge.
    Exclude,
    /// Count a non-converged block as `max_trials` steps.
    ImputeMax,
}

/// `steps_implicit - steps_explicit` per session.
pub fn step_differences(results: &[SessionOutcome], policy: NonConverged) -> Vec<f64> {
    results
        .iter()
        .filter_map(|r| {
            let fill = |s: Option<usize>| match policy {
                NonConverged::Exclude => s,
                NonConverged::ImputeMax => Some(s.unwrap_or(r.max_trials)),
            };
            Some(fill(r.steps_implicit)? as f64 - fill(r.steps_explicit)? as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDifferenceSummary {
    pub policy: NonConverged,
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub tost: Option<TostResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    pub condition: ActionId,
    pub n: usize,
    pub mean_rho: Option<f64>,
    pub sd_rho: Option<f64>,
    pub ttest: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub converged_correct: usize,
    pub converged_incorrect: usize,
    pub not_converged: usize,
}

impl OutcomeCounts {
    fn tally(outcomes: impl Iterator<Item = Outcome>) -> Self {
        let mut c = [0usize; 3];
        for o in outcomes {
            c[o.index()] += 1;
        }
        Self {
            converged_correct: c[0],
            converged_incorrect: c[1],
            not_converged: c[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub sessions: usize,
    pub explicit: OutcomeCounts,
    pub implicit: OutcomeCounts,
    pub contingency: ContingencyTable,
    pub step_difference: StepDifferenceSummary,
    pub drift: Vec<DriftSummary>,
}

pub const EQUIVALENCE_BOUND_STEPS: f64 = 5.0;

pub fn summarize_steps(results: &[SessionOutcome], policy: NonConverged) -> StepDifferenceSummary {
    let diffs = step_differences(results, policy);
    StepDifferenceSummary {
        policy,
        n: diffs.len(),
        mean: (!diffs.is_empty()).then(|| mean(&diffs)),
        sd: (diffs.len() >= 2).then(|| sample_sd(&diffs)),
        tost: tost_equivalence(&diffs, EQUIVALENCE_BOUND_STEPS).ok(),
    }
}

/// Pearson correlation between training trial index and rating, per
/// condition, for one session's log.
pub fn drift_correlations(records: &[TrialRecord]) -> [Option<f64>; NUM_ACTIONS] {
    std::array::from_fn(|c| {
        let (t, y): (Vec<f64>, Vec<f64>) = records
            .iter()
            .filter(|r| r.block == Block::Training && r.condition.index() == c)
            .map(|r| (r.t as f64, r.reward))
            .unzip();
        pearson(&t, &y).ok()
    })
}

pub fn summarize_drift(per_session: &[[Option<f64>; NUM_ACTIONS]]) -> Vec<DriftSummary> {
    ActionId::ALL
        .iter()
        .map(|&a| {
            let rhos: Vec<f64> = per_session.iter().filter_map(|s| s[a.index()]).collect();
            DriftSummary {
                condition: a,
                n: rhos.len(),
                mean_rho: (!rhos.is_empty()).then(|| mean(&rhos)),
                sd_rho: (rhos.len() >= 2).then(|| sample_sd(&rhos)),
                ttest: one_sample_ttest(&rhos, 0.0).ok(),
            }
        })
        .collect()
}

pub fn analyze(
    results: &[SessionOutcome],
    drift: &[[Option<f64>; NUM_ACTIONS]],
    policy: NonConverged,
) -> AnalysisReport {
    AnalysisReport {
        sessions: results.len(),
        explicit: OutcomeCounts::tally(results.iter().map(|r| r.explicit_outcome)),
        implicit: OutcomeCounts::tally(results.iter().map(|r| r.implicit_outcome)),
        contingency: contingency(results),
        step_difference: summarize_steps(results, policy),
        drift: summarize_drift(drift),
    }
}

/// Analyses a set of session logs.
pub fn analyze_logs(logs: &[Vec<TrialRecord>], max_trials: usize, policy: NonConverged) -> Result<AnalysisReport> {
    let outcomes = logs
        .iter()
        .map(|l| SessionOutcome::from_log(l, max_trials))
        .collect::<Result<Vec<_>>>()?;
    let drift: Vec<_> = logs.iter().map(|l| drift_correlations(l)).collect();
    Ok(analyze(&outcomes, &drift, policy))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `runs.csv`, `contingency.csv` and `drift.csv` into `dir`.
pub fn write_csv_tables(
    dir: &Path,
    names: &[String],
    results: &[SessionOutcome],
    report: &AnalysisReport,
) -> Result<()> {
    let mut runs = std::fs::File::create(dir.join("runs.csv"))?;
    writeln!(runs, "session,truth,explicit_outcome,implicit_outcome,steps_explicit,steps_implicit")?;
    for (name, r) in names.iter().zip(results) {
        writeln!(
            runs,
            "{name},{},{},{},{},{}",
            r.truth.index(),
            r.explicit_outcome.label(),
            r.implicit_outcome.label(),
            r.steps_explicit.map(|s| s.to_string()).unwrap_or_default(),
            r.steps_implicit.map(|s| s.to_string()).unwrap_or_default(),
        )?;
    }
    let mut table = std::fs::File::create(dir.join("contingency.csv"))?;
    writeln!(table, "explicit\\implicit,{}", Outcome::ALL.map(Outcome::label).join(","))?;
    for e in Outcome::ALL {
        let row: Vec<String> = Outcome::ALL.iter().map(|&i| report.contingency.get(e, i).to_string()).collect();
        writeln!(table, "{},{}", e.label(), row.join(","))?;
    }
    let mut drift = std::fs::File::create(dir.join("drift.csv"))?;
    writeln!(drift, "condition,n,mean_rho,sd_rho,t,p")?;
    for d in &report.drift {
        writeln!(
            drift,
            "{},{},{},{},{},{}",
            d.condition.name(),
            d.n,
            opt(d.mean_rho),
            opt(d.sd_rho),
            opt(d.ttest.map(|t| t.t)),
            opt(d.ttest.map(|t| t.p)),
        )?;
    }
    Ok(())
}
