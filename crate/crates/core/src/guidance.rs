//! Solver guidance derived from bias predictions.
//!
//! A prediction `p̂_i ∈ [0,1]` is turned into a confidence
//! `score = 1 − |p̂_i − round(p̂_i)|` in `[0.5, 1]`; `round(0.5)` is 1.
//! Node scores, warm-start rounding and branching priorities are all built
//! from this score.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::bnb::{self, SolveConfig, Strategy};
use crate::error::{Error, Result};
use crate::model::{BlpInstance, FixingSet, VariableFixing};

/// Nearest integer with ties going up.
pub fn round_prediction(p: f64) -> bool {
    p >= 0.5
}

pub fn confidence_score(p: f64) -> f64 {
    let r = if round_prediction(p) { 1.0 } else { 0.0 };
    1.0 - (p - r).abs()
}

/// Contribution of a single fixing to a node score.
pub fn fixing_score(value: bool, p: f64) -> f64 {
    let s = confidence_score(p);
    if value == round_prediction(p) {
        s
    } else {
        1.0 - s
    }
}

/// Sum of [`fixing_score`] over every fixed variable; 0 at the root.
pub fn node_score(fixings: &FixingSet, predictions: &[f64]) -> f64 {
    fixings
        .iter()
        .map(|f| fixing_score(f.value, predictions[f.var]))
        .sum()
}

pub fn variable_priorities(predictions: &[f64]) -> Vec<f64> {
    predictions.iter().map(|&p| confidence_score(p)).collect()
}

/// Highest-priority candidate; ties go to the lowest index.
pub fn select_by_priority(candidates: &[usize], priorities: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in candidates {
        if best.is_none_or(|b| {
            priorities[i] > priorities[b] || (priorities[i] == priorities[b] && i < b)
        }) {
            best = Some(i);
        }
    }
    best
}

pub const DEFAULT_ROUNDING_GRID: [f64; 6] = [0.99, 0.98, 0.96, 0.92, 0.84, 0.68];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartConfig {
    pub rounding_grid: Vec<f64>,
    pub repair_node_limit: usize,
    pub repair_time_limit: Duration,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            rounding_grid: DEFAULT_ROUNDING_GRID.to_vec(),
            repair_node_limit: 2000,
            repair_time_limit: Duration::from_secs(5),
        }
    }
}

impl WarmStartConfig {
    pub fn validate(&self) -> Result<()> {
        let in_range = self.rounding_grid.iter().all(|&g| (0.5..1.0).contains(&g));
        let descending = self.rounding_grid.windows(2).all(|w| w[0] > w[1]);
        if in_range && descending {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "rounding grid must be strictly descending within [0.5, 1)".into(),
            ))
        }
    }
}

/// Fixings implied by rounding every prediction whose score reaches `p_min`.
pub fn rounding_fixings(predictions: &[f64], p_min: f64) -> FixingSet {
    let fixings = predictions
        .iter()
        .enumerate()
        .filter(|(_, &p)| confidence_score(p) >= p_min)
        .map(|(i, &p)| VariableFixing::new(i, round_prediction(p)));
    FixingSet::from_fixings(fixings).expect("one fixing per variable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub solution: Vec<bool>,
    pub objective: f64,
    /// Grid value whose partial rounding was repaired.
    pub p_min: f64,
    pub num_fixed: usize,
}

/// Rounds confident predictions and repairs the rest with a limited
/// branch-and-bound, trying each grid value from the most conservative
/// down. Returns the first successful repair.
pub fn warm_start(
    inst: &BlpInstance,
    predictions: &[f64],
    cfg: &WarmStartConfig,
) -> Result<Option<WarmStart>> {
    warm_start_until(inst, predictions, cfg, None)
}

/// As [`warm_start`], additionally stopping once `budget` has elapsed.
pub fn warm_start_until(
    inst: &BlpInstance,
    predictions: &[f64],
    cfg: &WarmStartConfig,
    budget: Option<Duration>,
) -> Result<Option<WarmStart>> {
    if predictions.len() != inst.num_vars() {
        return Err(Error::PredictionShape {
            expected: inst.num_vars(),
            got: predictions.len(),
        });
    }
    cfg.validate()?;
    let start = std::time::Instant::now();
    for &p_min in &cfg.rounding_grid {
        let mut time_limit = cfg.repair_time_limit;
        if let Some(b) = budget {
            let left = b.saturating_sub(start.elapsed());
            if left.is_zero() {
                break;
            }
            time_limit = time_limit.min(left);
        }
        let fixings = rounding_fixings(predictions, p_min);
        let repair = SolveConfig {
            strategy: Strategy::NodeSelect,
            time_limit: Some(time_limit),
            node_limit: Some(cfg.repair_node_limit),
            predictions: Some(predictions.to_vec()),
            root_fixings: fixings.clone(),
            ..SolveConfig::default()
        };
        let report = bnb::solve(inst, &repair)?;
        if let Some(sol) = report.best_solution {
            debug_assert!(inst.is_feasible(&sol));
            return Ok(Some(WarmStart {
                objective: inst.objective_value(&sol),
                solution: sol,
                p_min,
                num_fixed: fixings.len(),
            }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_values() {
        assert_eq!(confidence_score(0.9), 0.9);
        assert_eq!(confidence_score(0.5), 0.5);
        assert_eq!(confidence_score(0.0), 1.0);
        assert_eq!(confidence_score(1.0), 1.0);
        assert!((confidence_score(0.2) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn worked_example_nodes() {
        let p = [0.2, 0.5, 0.5, 0.8, 0.9];
        let n1 = FixingSet::from_fixings([
            VariableFixing::new(0, false),
            VariableFixing::new(3, true),
            VariableFixing::new(4, false),
        ])
        .unwrap();
        let n2 = FixingSet::from_fixings([
            VariableFixing::new(0, false),
            VariableFixing::new(3, true),
            VariableFixing::new(4, true),
        ])
        .unwrap();
        assert!((node_score(&n1, &p) - 1.7).abs() < 1e-12);
        assert!((node_score(&n2, &p) - 2.5).abs() < 1e-12);
        assert_eq!(node_score(&FixingSet::new(), &p), 0.0);
    }

    #[test]
    fn rounding_threshold_rule() {
        let f = rounding_fixings(&[0.99, 0.01, 0.6], 0.9);
        assert_eq!(f.get(0), Some(true));
        assert_eq!(f.get(1), Some(false));
        assert_eq!(f.get(2), None);
        assert!(rounding_fixings(&[0.6, 0.4, 0.5], 0.68).is_empty());
    }

    #[test]
    fn priority_argmax_and_ties() {
        let pr = variable_priorities(&[0.5, 0.99]);
        assert_eq!(select_by_priority(&[0, 1], &pr), Some(1));
        let pr = variable_priorities(&[0.3; 4]);
        assert_eq!(select_by_priority(&[2, 1, 3], &pr), Some(1));
    }

    #[test]
    fn grid_validation() {
        let mut cfg = WarmStartConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.rounding_grid = vec![0.9, 0.95];
        assert!(cfg.validate().is_err());
        cfg.rounding_grid = vec![1.0];
        assert!(cfg.validate().is_err());
    }
}
