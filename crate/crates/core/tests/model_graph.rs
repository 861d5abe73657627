mod common;

use std::collections::BTreeSet;

use mipgnn::generate::{
    gen_erdos_renyi, gen_gisp, gen_gisp_er, gen_random_blp, removable_edges, GispParams,
};
use mipgnn::gnn::residual_error;
use mipgnn::model::{encode_bipartite, featurized_graph, raw_features};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (
        mean,
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n,
    )
}

fn check_standardized(raw: &[f64], scaled: &[f64]) {
    if raw.iter().all(|&v| v == raw[0]) {
        assert!(scaled.iter().all(|&v| v == 0.0));
    } else {
        let (mean, var) = moments(scaled);
        assert!(mean.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
    }
}

#[test]
#[allow(clippy::needless_range_loop)]
fn degrees_equal_nonzero_counts() {
    let inst = gen_random_blp(10, 8, 0.4, 5).unwrap();
    let g = encode_bipartite(&inst);
    let mut dense = vec![vec![0.0; 10]; 8];
    for (j, row) in inst.rows().iter().enumerate() {
        for &(i, a) in row {
            dense[j][i] = a;
        }
    }
    for i in 0..10 {
        assert_eq!(
            g.var_degree(i),
            (0..8).filter(|&j| dense[j][i] != 0.0).count()
        );
    }
    for j in 0..8 {
        assert_eq!(
            g.cons_degree(j),
            dense[j].iter().filter(|a| **a != 0.0).count()
        );
    }
    let edges: BTreeSet<(usize, usize)> = (0..g.num_edges())
        .map(|k| (g.edge_var[k], g.edge_cons[k]))
        .collect();
    let nonzero: BTreeSet<(usize, usize)> = (0..8)
        .flat_map(|j| (0..10).map(move |i| (i, j)))
        .filter(|&(i, j)| dense[j][i] != 0.0)
        .collect();
    assert_eq!(edges, nonzero);
}

#[test]
fn features_are_standardized_columns() {
    for inst in common::small_instances(20, 20) {
        let g = featurized_graph(&inst);
        let raw = raw_features(&g);
        for col in 0..2 {
            let r: Vec<f64> = raw.var.iter().map(|f| f[col]).collect();
            let s: Vec<f64> = g.var_features.iter().map(|f| f[col]).collect();
            check_standardized(&r, &s);
            let r: Vec<f64> = raw.cons.iter().map(|f| f[col]).collect();
            let s: Vec<f64> = g.cons_features.iter().map(|f| f[col]).collect();
            check_standardized(&r, &s);
        }
        check_standardized(&raw.edge, &g.edge_features);
    }
}

#[test]
fn graph_rebuilds_the_instance() {
    for inst in common::small_instances(20, 20) {
        let g = featurized_graph(&inst);
        let (rows, rhs, obj) = g.reconstruct();
        assert_eq!(rows, inst.rows());
        assert_eq!(rhs, inst.rhs());
        assert_eq!(obj, inst.objective());
        assert_eq!(featurized_graph(&inst), g);
    }
}

#[test]
fn gisp_sizes_follow_graph_counts() {
    for seed in 0..10 {
        let params = GispParams::set2(30, 0.2, seed);
        let graph = gen_erdos_renyi(30, 0.2, seed).unwrap();
        let removable = removable_edges(&graph, params.alpha, seed);
        let inst = gen_gisp(&graph, &params).unwrap();
        assert_eq!(
            inst.num_vars(),
            30 + removable.iter().filter(|r| **r).count()
        );
        assert_eq!(inst.num_cons(), graph.edges.len());
        assert_eq!(inst, gen_gisp_er(&params).unwrap());
        assert!(inst.is_feasible(&vec![false; inst.num_vars()]));
    }
}

#[test]
fn random_blps_are_distinct_and_feasible() {
    let insts: Vec<_> = (0..10)
        .map(|s| gen_random_blp(12, 5, 0.5, s).unwrap())
        .collect();
    for (k, inst) in insts.iter().enumerate() {
        assert!(!common::enumerate_feasible(inst).is_empty());
        assert!(insts[..k].iter().all(|other| other != inst));
    }
}

#[test]
fn residual_softmax_example() {
    // one variable, three rows with activity x̄ = 1 and rhs chosen so that
    // A·x̄ − b = (1, 0, −1)
    let inst = mipgnn::model::BlpInstance::new(
        vec!["x".into()],
        vec![1.0],
        vec!["a".into(), "b".into(), "c".into()],
        vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(0, 1.0)]],
        vec![0.0, 1.0, 2.0],
    )
    .unwrap();
    let e = residual_error(&[1.0], &featurized_graph(&inst));
    let total = 1f64.exp() + 1.0 + (-1f64).exp();
    let want = [1f64.exp() / total, 1.0 / total, (-1f64).exp() / total];
    for (a, b) in e.iter().zip(want) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(
        (e[0] - 0.66524).abs() < 5e-6
            && (e[1] - 0.24473).abs() < 5e-6
            && (e[2] - 0.09003).abs() < 5e-6
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabelling_is_a_graph_isomorphism(seed in 0u64..10_000) {
        let inst = gen_random_blp(8, 5, 0.5, seed).unwrap();
        let mut perm: Vec<usize> = (0..8).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let g = featurized_graph(&inst);
        let h = featurized_graph(&inst.permute_vars(&perm));
        for (i, &pi) in perm.iter().enumerate() {
            prop_assert_eq!(g.var_features[i], h.var_features[pi]);
        }
        prop_assert_eq!(&g.cons_features, &h.cons_features);
        // standardization sums edges in storage order, so features may move by an ulp
        type Edges = std::collections::BTreeMap<(usize, usize), (f64, f64)>;
        let edges = |g: &mipgnn::model::BipartiteGraph, map: &dyn Fn(usize) -> usize| -> Edges {
            (0..g.num_edges())
                .map(|k| ((map(g.edge_var[k]), g.edge_cons[k]), (g.edge_coef[k], g.edge_features[k])))
                .collect()
        };
        let (a, b) = (edges(&g, &|i| perm[i]), edges(&h, &|i| i));
        prop_assert_eq!(a.len(), b.len());
        for (key, (coef, feat)) in &a {
            let (c2, f2) = b[key];
            prop_assert_eq!(*coef, c2);
            prop_assert!((feat - f2).abs() <= 1e-12);
        }
    }

    #[test]
    fn residual_is_a_distribution(seed in 0u64..1000, xbar in prop::collection::vec(0.0f64..=1.0, 6)) {
        let inst = gen_random_blp(6, 4, 0.6, seed).unwrap();
        let e = residual_error(&xbar, &featurized_graph(&inst));
        prop_assert!(e.iter().all(|&p| p >= 0.0));
        prop_assert!((e.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
