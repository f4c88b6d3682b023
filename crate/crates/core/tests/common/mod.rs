//! Independent brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use neurohaptic::analysis::{Outcome, SessionOutcome};

/// Type-7 quantile straight from the definition: position (n - 1) p in the
/// sorted sample, linear between the neighbouring order statistics.
pub fn quantile7(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

pub fn tukey_oracle(values: &[f64], k: f64) -> Vec<bool> {
    if values.len() < 4 {
        return vec![false; values.len()];
    }
    let q1 = quantile7(values, 0.25);
    let q3 = quantile7(values, 0.75);
    values
        .iter()
        .map(|&v| v < q1 - k * (q3 - q1) || v > q3 + k * (q3 - q1))
        .collect()
}

/// Probability that a random positive outranks a random negative (ties 1/2).
pub fn mann_whitney_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Sample median by sorting.
pub fn median_oracle(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 }
}

/// Median split with the tie rule: strict sides first, then each tied score
/// (in input order) joins the currently smaller class, class 0 on equality.
pub fn median_split_oracle(values: &[f64]) -> (Vec<u8>, f64) {
    let m = median_oracle(values);
    let mut zeros = values.iter().filter(|&&v| v < m).count();
    let mut ones = values.iter().filter(|&&v| v > m).count();
    let mut labels = Vec::new();
    for &v in values {
        if v < m {
            labels.push(0);
        } else if v > m {
            labels.push(1);
        } else if ones < zeros {
            ones += 1;
            labels.push(1);
        } else {
            zeros += 1;
            labels.push(0);
        }
    }
    (labels, m)
}

pub fn contingency_oracle(results: &[SessionOutcome]) -> [[usize; 3]; 3] {
    let mut t = [[0; 3]; 3];
    for (i, e) in Outcome::ALL.iter().enumerate() {
        for (j, m) in Outcome::ALL.iter().enumerate() {
            t[i][j] = results
                .iter()
                .filter(|r| r.explicit_outcome == *e && r.implicit_outcome == *m)
                .count();
        }
    }
    t
}
