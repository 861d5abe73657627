//! Brute-force oracles shared by the integration suites. None of these call
//! into the solver code they are used to check.
#![allow(dead_code)]

pub mod nn;

use mipgnn::model::BlpInstance;
use rand::{Rng, SeedableRng};

/// Every binary point, as a bool vector, in counting order.
pub fn all_points(n: usize) -> impl Iterator<Item = Vec<bool>> {
    assert!(n <= 25);
    (0u64..(1u64 << n)).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
}

/// Feasibility checked with integer-exact arithmetic on the raw rows.
pub fn feasible(inst: &BlpInstance, x: &[bool]) -> bool {
    inst.rows().iter().zip(inst.rhs()).all(|(row, &b)| {
        let act: f64 = row.iter().filter(|(i, _)| x[*i]).map(|(_, a)| *a).sum();
        act <= b + 1e-9
    })
}

pub fn objective(inst: &BlpInstance, x: &[bool]) -> f64 {
    inst.objective()
        .iter()
        .zip(x)
        .filter(|(_, &v)| v)
        .map(|(c, _)| *c)
        .sum()
}

/// All feasible points with their objective values.
pub fn enumerate_feasible(inst: &BlpInstance) -> Vec<(Vec<bool>, f64)> {
    all_points(inst.num_vars())
        .filter(|x| feasible(inst, x))
        .map(|x| {
            let o = objective(inst, &x);
            (x, o)
        })
        .collect()
}

pub fn brute_force_optimum(inst: &BlpInstance) -> Option<f64> {
    enumerate_feasible(inst)
        .into_iter()
        .map(|(_, o)| o)
        .fold(None, |acc, o| Some(acc.map_or(o, |a: f64| a.min(o))))
}

/// Points within `eps·|opt|` of the optimum (the near-optimal set).
pub fn near_optimal_set(inst: &BlpInstance, eps: f64) -> Vec<Vec<bool>> {
    let pts = enumerate_feasible(inst);
    let Some(best) = pts.iter().map(|p| p.1).reduce(f64::min) else {
        return vec![];
    };
    pts.into_iter()
        .filter(|(_, o)| (o - best).abs() <= eps * best.abs())
        .map(|(x, _)| x)
        .collect()
}

/// Component-wise mean over the near-optimal set.
pub fn brute_force_bias(inst: &BlpInstance, eps: f64) -> Vec<f64> {
    let set = near_optimal_set(inst, eps);
    let n = inst.num_vars();
    let mut counts = vec![0usize; n];
    for x in &set {
        for i in 0..n {
            if x[i] {
                counts[i] += 1;
            }
        }
    }
    counts
        .iter()
        .map(|&c| c as f64 / set.len() as f64)
        .collect()
}

/// Solves a square system by Gaussian elimination; `None` if singular.
#[allow(clippy::needless_range_loop)]
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// LP optimum over `Ax ≤ b, 0 ≤ x ≤ 1` by enumerating every vertex
/// candidate (intersection of n linearly independent tight constraints).
/// `None` when the polytope is empty.
pub fn vertex_enumeration_lp(
    cost: &[f64],
    rows: &[Vec<(usize, f64)>],
    rhs: &[f64],
) -> Option<(f64, Vec<f64>)> {
    let n = cost.len();
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in rows.iter().zip(rhs) {
        let mut a = vec![0.0; n];
        for &(i, v) in row {
            a[i] += v;
        }
        cons.push((a, b));
    }
    for i in 0..n {
        let mut up = vec![0.0; n];
        up[i] = 1.0;
        cons.push((up, 1.0));
        let mut lo = vec![0.0; n];
        lo[i] = -1.0;
        cons.push((lo, 0.0));
    }
    let k = cons.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&c| cons[c].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&c| cons[c].1).collect();
        if let Some(x) = solve_square(a, b) {
            let ok = cons
                .iter()
                .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-9);
            if ok {
                let obj: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Small LP with half-integer coefficients and arbitrary rhs; may be
/// infeasible.
pub fn random_lp(seed: u64) -> BlpInstance {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let mut rows = Vec::new();
    for _ in 0..m {
        let mut row = Vec::new();
        for i in 0..n {
            if rng.random::<f64>() < 0.7 {
                row.push((i, (rng.random::<f64>() * 10.0 - 5.0).round() / 2.0));
            }
        }
        if row.iter().all(|(_, a)| *a == 0.0) {
            row = vec![(rng.random_range(0..n), 1.0)];
        }
        rows.push(row);
    }
    let rhs = (0..m).map(|_| rng.random::<f64>() * 6.0 - 2.0).collect();
    let obj = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
    BlpInstance::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        obj,
        (0..m).map(|j| format!("c{j}")).collect(),
        rows,
        rhs,
    )
    .unwrap()
}

/// Desk-scale instances with at most `max_vars` variables: random BLPs and
/// GISP graphs alternate, seeded by position.
pub fn small_instances(count: usize, max_vars: usize) -> Vec<BlpInstance> {
    use mipgnn::generate::{gen_gisp_er, gen_random_blp, GispParams};
    let mut out = Vec::with_capacity(count);
    let mut seed = 0u64;
    while out.len() < count {
        let inst = if seed.is_multiple_of(2) {
            let n = 4 + (seed as usize / 2) % (max_vars - 3);
            gen_random_blp(n, 1 + (seed as usize / 2) % 6, 0.6, seed).unwrap()
        } else {
            let nodes = 4 + (seed as usize / 2) % 6;
            gen_gisp_er(&GispParams::set2(nodes, 0.35, seed)).unwrap()
        };
        seed += 1;
        if inst.num_vars() <= max_vars {
            out.push(inst);
        }
    }
    out
}

/// `A·x ≥ b` over `[0,1]^n` with entries in `[-1, 1]` and a planted
/// feasible point, so the width stays at most `n + 1`.
pub fn planted_feasible_system(seed: u64) -> (mipgnn::mwu::FeasibilitySystem, Vec<f64>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let m = rng.random_range(2..=6);
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..m {
        let row: Vec<(usize, f64)> = (0..n)
            .map(|i| (i, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        let act: f64 = row.iter().map(|&(i, a)| a * x[i]).sum();
        rhs.push(act - rng.random::<f64>() * 0.2);
        rows.push(row);
    }
    (
        mipgnn::mwu::FeasibilitySystem::new(n, rows, rhs).unwrap(),
        x,
    )
}
