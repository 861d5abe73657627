mod common;

use std::time::Duration;

use mipgnn::bnb::{solve, SolveConfig, Strategy};
use mipgnn::guidance::{
    confidence_score, node_score, rounding_fixings, select_by_priority, variable_priorities,
    warm_start, WarmStartConfig,
};
use mipgnn::model::{FixingSet, VariableFixing};
use proptest::prelude::*;

fn fixings(pairs: &[(usize, bool)]) -> FixingSet {
    FixingSet::from_fixings(pairs.iter().map(|&(i, v)| VariableFixing::new(i, v))).unwrap()
}

#[test]
fn worked_example_node_scores() {
    let p = [0.2, 0.5, 0.5, 0.8, 0.9];
    let n1 = node_score(&fixings(&[(0, false), (3, true), (4, false)]), &p);
    let n2 = node_score(&fixings(&[(0, false), (3, true), (4, true)]), &p);
    // the decimal 1.7 has no binary form; the three terms summed in double
    // precision land one ulp above its nearest double
    assert_eq!(n1, (1.0 - 0.2) + (1.0 - (0.8f64 - 1.0).abs()) + (1.0 - 0.9));
    assert!((n1 - 1.7).abs() <= 1.7 * f64::EPSILON);
    assert_eq!(n2, 0.8 + 0.8 + 0.9);
    assert_eq!(n2, 2.5);
    assert_eq!(node_score(&FixingSet::new(), &p), 0.0);
}

#[test]
fn warm_starts_are_feasible() {
    for (k, inst) in common::small_instances(20, 20).iter().enumerate() {
        let p: Vec<f64> = (0..inst.num_vars())
            .map(|i| ((i * 7 + k) % 10) as f64 / 9.0)
            .collect();
        if let Some(ws) = warm_start(inst, &p, &WarmStartConfig::default()).unwrap() {
            assert!(common::feasible(inst, &ws.solution));
            assert_eq!(ws.objective, common::objective(inst, &ws.solution));
            assert_eq!(ws.num_fixed, rounding_fixings(&p, ws.p_min).len());
        }
    }
}

#[test]
fn exhaustive_bias_warm_start_is_near_optimal() {
    for inst in common::small_instances(15, 15) {
        let opt = common::brute_force_optimum(&inst).unwrap();
        let bias = common::brute_force_bias(&inst, 0.1);
        let ws = warm_start(&inst, &bias, &WarmStartConfig::default())
            .unwrap()
            .unwrap();
        assert!(
            ws.objective - opt <= 0.1 * opt.abs() + 1e-9,
            "{} vs {opt}",
            ws.objective
        );
    }
}

#[test]
fn threshold_rule_example() {
    let f = rounding_fixings(&[0.99, 0.01, 0.6], 0.9);
    assert_eq!(f.dense(3), vec![Some(true), Some(false), None]);
    assert!(rounding_fixings(&[0.6, 0.35, 0.5], 0.68).is_empty());
}

#[test]
fn warm_start_strategy_reports_warmstart_incumbent() {
    let inst = common::small_instances(6, 14).pop().unwrap();
    let bias = common::brute_force_bias(&inst, 0.1);
    let cfg = SolveConfig {
        strategy: Strategy::WarmStartBestBound,
        predictions: Some(bias),
        time_limit: Some(Duration::from_secs(10)),
        ..Default::default()
    };
    let r = solve(&inst, &cfg).unwrap();
    assert_eq!(
        r.incumbents[0].found_via,
        mipgnn::bnb::IncumbentSource::Warmstart
    );
    assert_eq!(r.best_objective(), common::brute_force_optimum(&inst));
}

#[test]
fn invalid_grids_are_rejected() {
    for grid in [vec![0.9, 0.95], vec![1.0], vec![0.4], vec![0.8, 0.8]] {
        let cfg = WarmStartConfig {
            rounding_grid: grid,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
    assert!(WarmStartConfig::default().validate().is_ok());
}

#[test]
fn priorities_pick_most_confident() {
    let pr = variable_priorities(&[0.5, 0.99]);
    assert_eq!(select_by_priority(&[0, 1], &pr), Some(1));
    let flat = variable_priorities(&[0.3; 4]);
    assert_eq!(select_by_priority(&[2, 1, 3], &flat), Some(1));
}

proptest! {
    #[test]
    fn confidence_lies_in_upper_half(p in 0.0f64..=1.0) {
        let s = confidence_score(p);
        prop_assert!((0.5..=1.0).contains(&s));
    }

    #[test]
    fn priorities_are_symmetric(p in prop::collection::vec(0.0f64..=1.0, 1..20)) {
        let flipped: Vec<f64> = p.iter().map(|v| 1.0 - v).collect();
        let a = variable_priorities(&p);
        let b = variable_priorities(&flipped);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-15);
        }
    }

    #[test]
    fn each_fixing_adds_at_most_one(
        p in prop::collection::vec(0.0f64..=1.0, 6),
        values in prop::collection::vec(any::<bool>(), 6),
    ) {
        let mut node = FixingSet::new();
        let mut score = 0.0;
        for (i, &v) in values.iter().enumerate() {
            node = node.with(VariableFixing::new(i, v)).unwrap();
            let child = node_score(&node, &p);
            prop_assert!(child >= score - 1e-15 && child <= score + 1.0 + 1e-15);
            score = child;
        }
    }
}
