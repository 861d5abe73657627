//! Instance generators.
//!
//! All randomness comes from ChaCha8 seeded with the caller's 64-bit seed.
//! Independent decisions use separate ChaCha streams so that, for example,
//! changing `alpha` never changes the underlying graph:
//!
//! | stream | use                                   |
//! |--------|---------------------------------------|
//! | 0      | Erdős–Rényi edge draws                |
//! | 1      | GISP removable-edge draws             |
//! | 2      | random BLP coefficients and rhs       |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlpInstance;

pub const GRAPH_STREAM: u64 = 0;
pub const REMOVABLE_STREAM: u64 = 1;
pub const BLP_STREAM: u64 = 2;

/// Largest variable count accepted by [`gen_random_blp`].
pub const MAX_RANDOM_BLP_VARS: usize = 25;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simple undirected graph; edges are `(u, v)` with `u < v` in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndirectedGraph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    pub fn new(num_nodes: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges.retain(|&(u, v)| u != v);
        Self { num_nodes, edges }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::new(n, edges)
    }
}

/// G(n, p): each of the n(n−1)/2 pairs is an edge independently with
/// probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<UndirectedGraph> {
    if n < 2 {
        return Err(Error::DegenerateGraph { n });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "edge probability {p} outside [0,1]"
        )));
    }
    let mut rng = rng_for(seed, GRAPH_STREAM);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(UndirectedGraph {
        num_nodes: n,
        edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GispParams {
    pub num_nodes: usize,
    pub edge_prob: f64,
    pub alpha: f64,
    pub node_revenue: f64,
    pub edge_cost: f64,
    pub seed: u64,
}

impl GispParams {
    /// SET2 convention: revenue 100, removal cost 1, alpha 0.75.
    pub fn set2(num_nodes: usize, edge_prob: f64, seed: u64) -> Self {
        Self {
            num_nodes,
            edge_prob,
            alpha: 0.75,
            node_revenue: 100.0,
            edge_cost: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let prob = 0.0..=1.0;
        if !prob.contains(&self.edge_prob) || !prob.contains(&self.alpha) {
            return Err(Error::InvalidArgument(
                "probabilities must lie in [0,1]".into(),
            ));
        }
        if !(self.node_revenue > 0.0 && self.edge_cost > 0.0) {
            return Err(Error::InvalidArgument(
                "revenue and cost must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Marks each edge removable independently with probability `alpha`.
pub fn removable_edges(graph: &UndirectedGraph, alpha: f64, seed: u64) -> Vec<bool> {
    let mut rng = rng_for(seed, REMOVABLE_STREAM);
    graph
        .edges
        .iter()
        .map(|_| rng.random::<f64>() < alpha)
        .collect()
}

/// Generalized independent set problem on `graph`.
///
/// Variables are `x<v>` for every node followed by `y<u>_<v>` for every
/// removable edge. The model maximizes revenue·Σx − cost·Σy subject to
/// `x_u + x_v − y_e ≤ 1` on removable edges and `x_u + x_v ≤ 1` on the
/// rest; it is stored as the equivalent minimization.
pub fn gen_gisp(graph: &UndirectedGraph, params: &GispParams) -> Result<BlpInstance> {
    params.validate()?;
    let removable = removable_edges(graph, params.alpha, params.seed);
    let n = graph.num_nodes;
    let mut names: Vec<String> = (0..n).map(|v| format!("x{v}")).collect();
    let mut objective = vec![-params.node_revenue; n];
    let mut cons_names = Vec::with_capacity(graph.edges.len());
    let mut rows = Vec::with_capacity(graph.edges.len());
    for (&(u, v), &rem) in graph.edges.iter().zip(&removable) {
        let mut row = vec![(u, 1.0), (v, 1.0)];
        if rem {
            row.push((names.len(), -1.0));
            names.push(format!("y{u}_{v}"));
            objective.push(params.edge_cost);
        }
        cons_names.push(format!("e{u}_{v}"));
        rows.push(row);
    }
    let rhs = vec![1.0; rows.len()];
    BlpInstance::new(names, objective, cons_names, rows, rhs)
}

/// GISP on a fresh Erdős–Rényi graph drawn from the same seed.
pub fn gen_gisp_er(params: &GispParams) -> Result<BlpInstance> {
    let graph = gen_erdos_renyi(params.num_nodes, params.edge_prob, params.seed)?;
    gen_gisp(&graph, params)
}

/// Small random BLP with integer data in [−10, 10] whose all-zeros point is
/// feasible.
///
/// Each variable enters a row with probability `density` (every row gets at
/// least one nonzero). Right-hand sides are drawn from `[0, Σ positive
/// coefficients]`.
pub fn gen_random_blp(
    num_vars: usize,
    num_cons: usize,
    density: f64,
    seed: u64,
) -> Result<BlpInstance> {
    if num_vars == 0 || num_vars > MAX_RANDOM_BLP_VARS {
        return Err(Error::InvalidArgument(format!(
            "random BLPs need 1..={MAX_RANDOM_BLP_VARS} variables, got {num_vars}"
        )));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!(
            "density {density} outside [0,1]"
        )));
    }
    let mut rng = rng_for(seed, BLP_STREAM);
    let nonzero = |rng: &mut ChaCha8Rng| {
        let v: i32 = rng.random_range(1..=10);
        if rng.random::<bool>() {
            v as f64
        } else {
            -(v as f64)
        }
    };
    let objective: Vec<f64> = (0..num_vars)
        .map(|_| rng.random_range(-10..=10) as f64)
        .collect();
    let mut rows = Vec::with_capacity(num_cons);
    let mut rhs = Vec::with_capacity(num_cons);
    for _ in 0..num_cons {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..num_vars {
            if rng.random::<f64>() < density {
                row.push((i, nonzero(&mut rng)));
            }
        }
        if row.is_empty() {
            let i = rng.random_range(0..num_vars);
            row.push((i, nonzero(&mut rng)));
        }
        let pos: f64 = row.iter().map(|&(_, a)| a.max(0.0)).sum();
        rhs.push(rng.random_range(0..=pos as i64) as f64);
        rows.push(row);
    }
    BlpInstance::new(
        (0..num_vars).map(|i| format!("x{i}")).collect(),
        objective,
        (0..num_cons).map(|j| format!("c{j}")).collect(),
        rows,
        rhs,
    )
}
