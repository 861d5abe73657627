//! Variable biases and their binarized class labels.

use serde::{Deserialize, Serialize};

use crate::bnb::SolutionPool;
use crate::error::{Error, Result};

/// Default classification threshold.
pub const DEFAULT_TAU: f64 = 0.0;

/// Component-wise mean over a solution pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVector {
    pub biases: Vec<f64>,
    pub epsilon: f64,
    pub pool_size: usize,
}

/// Output of [`threshold_bias`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryLabels {
    pub labels: Vec<u8>,
    pub tau: f64,
}

impl BinaryLabels {
    pub fn as_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| l as f64).collect()
    }
}

/// Mean of the given 0/1 points. Counts are exact, so the result does not
/// depend on the order of the points.
pub fn bias_of_points(points: &[Vec<bool>]) -> Result<Vec<f64>> {
    let first = points.first().ok_or(Error::EmptyPool)?;
    let mut counts = vec![0usize; first.len()];
    for x in points {
        if x.len() != counts.len() {
            return Err(Error::InvalidArgument(
                "pool points have different lengths".into(),
            ));
        }
        for (c, &v) in counts.iter_mut().zip(x) {
            *c += v as usize;
        }
    }
    let n = points.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

pub fn compute_bias(pool: &SolutionPool) -> Result<BiasVector> {
    Ok(BiasVector {
        biases: bias_of_points(&pool.solutions)?,
        epsilon: pool.epsilon,
        pool_size: pool.len(),
    })
}

/// Label 0 when `b ≤ τ`, else 1.
pub fn threshold_bias(bias: &[f64], tau: f64) -> Result<BinaryLabels> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {tau}"
        )));
    }
    Ok(BinaryLabels {
        labels: bias.iter().map(|&b| u8::from(b > tau)).collect(),
        tau,
    })
}
