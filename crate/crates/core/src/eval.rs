//! Paired comparison of two strategies over the same instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Relative tolerance under which two metric values tie.
pub const TIE_TOL: f64 = 1e-6;
/// Smallest pair count accepted by the normal approximation.
pub const MIN_WILCOXON_PAIRS: usize = 10;

/// `W⁺`, `W⁻` and the number of nonzero differences. Zero differences are
/// dropped; tied magnitudes share their average rank.
pub fn signed_rank_statistics(diffs: &[f64]) -> (f64, f64, usize) {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let (mut w_plus, mut w_minus) = (0.0, 0.0);
    let mut i = 0;
    while i < nz.len() {
        let mut j = i;
        while j + 1 < nz.len() && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // ranks i+1 ..= j+1
        let rank = (i + j + 2) as f64 / 2.0;
        for d in &nz[i..=j] {
            if *d > 0.0 {
                w_plus += rank;
            } else {
                w_minus += rank;
            }
        }
        i = j + 1;
    }
    (w_plus, w_minus, nz.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub w_plus: f64,
    pub w_minus: f64,
    pub nonzero: usize,
    pub z: f64,
    /// One-sided p-value for "the differences tend to be positive".
    pub p_value: f64,
}

/// One-sided signed-rank test via the normal approximation with tie
/// correction.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult> {
    if diffs.len() < MIN_WILCOXON_PAIRS {
        return Err(Error::Pairing(format!(
            "signed-rank test needs at least {MIN_WILCOXON_PAIRS} pairs, got {}",
            diffs.len()
        )));
    }
    let (w_plus, w_minus, n) = signed_rank_statistics(diffs);
    if n == 0 {
        return Ok(WilcoxonResult {
            w_plus,
            w_minus,
            nonzero: 0,
            z: 0.0,
            p_value: 1.0,
        });
    }
    let mut mags: Vec<f64> = diffs
        .iter()
        .filter(|d| **d != 0.0)
        .map(|d| d.abs())
        .collect();
    mags.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < mags.len() {
        let mut j = i;
        while j + 1 < mags.len() && mags[j + 1] == mags[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = if var > 0.0 {
        (w_plus - mean) / var.sqrt()
    } else {
        0.0
    };
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        nonzero: n,
        z,
        p_value: 1.0 - normal.cdf(z),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

/// Outcome for `a` against `b` when smaller is better.
pub fn compare_values(a: f64, b: f64) -> Outcome {
    if a == b || (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()) {
        Outcome::Tie
    } else if a < b {
        Outcome::Win
    } else {
        Outcome::Loss
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(with = "crate::io::json_f64")]
    pub mean: f64,
    #[serde(with = "crate::io::json_f64")]
    pub std: f64,
    #[serde(with = "crate::io::json_f64")]
    pub median: f64,
}

/// Mean, sample standard deviation and median.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            mean: f64::NAN,
            std: f64::NAN,
            median: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Summary { mean, std, median }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    pub a: Summary,
    pub b: Summary,
    /// Test of "a is smaller than b"; absent below the minimum pair count.
    pub wilcoxon: Option<WilcoxonResult>,
}

/// Compares a smaller-is-better metric keyed by instance id.
pub fn compare_metric(
    metric: &str,
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
) -> Result<MetricComparison> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let only_a: Vec<&String> = a.keys().filter(|k| !b.contains_key(*k)).collect();
        let only_b: Vec<&String> = b.keys().filter(|k| !a.contains_key(*k)).collect();
        return Err(Error::Pairing(format!(
            "instance sets differ: only in A {only_a:?}, only in B {only_b:?}"
        )));
    }
    let (mut wins, mut ties, mut losses) = (0, 0, 0);
    let mut diffs = Vec::with_capacity(a.len());
    for (x, y) in a.values().zip(b.values()) {
        match compare_values(*x, *y) {
            Outcome::Win => wins += 1,
            Outcome::Tie => ties += 1,
            Outcome::Loss => losses += 1,
        }
        let d = y - x;
        diffs.push(if d.is_nan() { 0.0 } else { d });
    }
    let av: Vec<f64> = a.values().copied().collect();
    let bv: Vec<f64> = b.values().copied().collect();
    let wilcoxon = if diffs.len() >= MIN_WILCOXON_PAIRS {
        Some(wilcoxon_signed_rank(&diffs)?)
    } else {
        None
    };
    Ok(MetricComparison {
        metric: metric.to_string(),
        wins,
        ties,
        losses,
        a: summarize(&av),
        b: summarize(&bv),
        wilcoxon,
    })
}
