//! Two-class linear discriminant with Ledoit-Wolf shrinkage.
//!
//! The pooled within-class covariance `S` (class means removed, divided by
//! `n`) is blended with a scaled identity:
//!
//! ```text
//! Σ = (1 - λ) S + λ μ I,      μ = tr(S) / d
//! δ² = ||S - μ I||²_F
//! β² = min(δ², (Σ_k ||x_k||⁴ - n ||S||²_F) / n²)
//! λ  = β² / δ²                (0 when δ² = 0)
//! ```
//!
//! Weights solve `Σ w = μ1 - μ0`; the bias puts the decision boundary at the
//! midpoint of the projected class means, so positive scores mean class 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::select::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Ledoit-Wolf intensity in [0, 1].
    pub shrinkage: f64,
}

impl LdaModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        u8::from(self.score(x) > 0.0)
    }
}

/// Ledoit-Wolf shrinkage of the covariance of already-centred rows.
/// Returns the shrunk covariance and λ.
pub fn ledoit_wolf(centered: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let (n, d) = centered.shape();
    let nf = n as f64;
    let s = centered.transpose() * centered / nf;
    let mu = s.trace() / d as f64;
    let mut target_gap = s.clone();
    for i in 0..d {
        target_gap[(i, i)] -= mu;
    }
    let delta = target_gap.norm_squared();
    let fourth: f64 = centered
        .row_iter()
        .map(|r| {
            let sq = r.norm_squared();
            sq * sq
        })
        .sum();
    let beta_bar = (fourth - nf * s.norm_squared()) / (nf * nf);
    let beta = beta_bar.max(0.0).min(delta);
    let lambda = if delta > 0.0 { (beta / delta).clamp(0.0, 1.0) } else { 0.0 };
    let mut shrunk = s * (1.0 - lambda);
    for i in 0..d {
        shrunk[(i, i)] += lambda * mu;
    }
    (shrunk, lambda)
}

pub fn fit_lda(x: &[Vec<f64>], y: &[Label]) -> Result<LdaModel> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::Shape("LDA needs at least one feature".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::Shape(format!("row {i} has {} features, expected {d}", x[i].len())));
    }
    let counts = [y.iter().filter(|&&l| l == 0).count(), y.iter().filter(|&&l| l == 1).count()];
    if counts[0] < 2 || counts[1] < 2 {
        return Err(Error::InsufficientData(format!(
            "LDA needs >= 2 rows per class, got {} / {}",
            counts[0], counts[1]
        )));
    }

    let mut means = [DVector::<f64>::zeros(d), DVector::<f64>::zeros(d)];
    for (row, &l) in x.iter().zip(y) {
        for (m, v) in means[l as usize].iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..2 {
        means[c] /= counts[c] as f64;
    }
    let centered = DMatrix::from_fn(x.len(), d, |i, j| x[i][j] - means[y[i] as usize][j]);
    let (cov, lambda) = ledoit_wolf(&centered);

    let diff = &means[1] - &means[0];
    let chol = cov.cholesky().ok_or_else(|| {
        Error::Singular(format!("shrunk covariance not positive definite (lambda = {lambda})"))
    })?;
    let l = chol.l();
    let diag_max = l.diagonal().amax();
    let diag_min = l.diagonal().iter().copied().fold(f64::INFINITY, f64::min);
    if !(diag_max > 0.0) || diag_min <= diag_max * 1e-10 {
        return Err(Error::Singular(format!("ill-conditioned covariance (lambda = {lambda})")));
    }
    let w = chol.solve(&diff);
    let midpoint = (&means[0] + &means[1]) * 0.5;
    let bias = -w.dot(&midpoint);
    Ok(LdaModel {
        weights: w.iter().copied().collect(),
        bias,
        shrinkage: lambda,
    })
}
