//! Multiplicative-weights feasibility for `A·x ≥ b` over the unit box, and
//! the MAE bound check built on it.
//!
//! Each iteration aggregates the constraints with the current distribution
//! `p`, asks the single-inequality oracle for a box point satisfying
//! `pᵀA·x ≥ pᵀb`, and shrinks the weight of every constraint in proportion
//! to how well that point satisfies it. The running average of oracle
//! answers converges to an ε-feasible point; an oracle failure certifies
//! infeasibility through `p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlpInstance;
use crate::simplex::{LinearProgram, LpStatus};

/// Slack granted to the oracle when comparing the box maximum to `β`, so
/// rounding in the aggregation never turns a feasible system infeasible.
pub const ORACLE_TOL: f64 = 1e-9;

/// `A·x ≥ b` with `x ∈ [0,1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilitySystem {
    pub num_vars: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl FeasibilitySystem {
    pub fn new(num_vars: usize, rows: Vec<Vec<(usize, f64)>>, rhs: Vec<f64>) -> Result<Self> {
        if rows.len() != rhs.len() {
            return Err(Error::InvalidArgument("row and rhs counts differ".into()));
        }
        let finite = rhs.iter().all(|b| b.is_finite())
            && rows
                .iter()
                .flatten()
                .all(|&(i, a)| i < num_vars && a.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "system entries must be finite and in range".into(),
            ));
        }
        Ok(Self {
            num_vars,
            rows,
            rhs,
        })
    }

    /// The relaxation of a canonical instance, with each `≤` row flipped.
    pub fn from_instance(inst: &BlpInstance) -> Self {
        Self {
            num_vars: inst.num_vars(),
            rows: inst
                .rows()
                .iter()
                .map(|r| r.iter().map(|&(i, a)| (i, -a)).collect())
                .collect(),
            rhs: inst.rhs().iter().map(|b| -b).collect(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn activity(&self, j: usize, x: &[f64]) -> f64 {
        self.rows[j].iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Largest `b_j − A_j·x`, clamped at zero.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|j| self.rhs[j] - self.activity(j, x))
            .fold(0.0, f64::max)
    }

    /// `max_j (Σ_i |A_ji| + |b_j|)`, which bounds `|A_j·x − b_j|` on the
    /// whole box.
    pub fn width(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| r.iter().map(|(_, a)| a.abs()).sum::<f64>() + b.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwuConfig {
    pub epsilon: f64,
    /// Step size; defaults to `ε / (4ρ)`.
    pub eta: Option<f64>,
    /// Width bound; defaults to [`FeasibilitySystem::width`].
    pub rho: Option<f64>,
    /// Base budget `T`; defaults to [`iteration_bound`].
    pub max_iters: Option<usize>,
    /// The budget is doubled this many times before giving up.
    pub max_doublings: u32,
}

impl MwuConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            eta: None,
            rho: None,
            max_iters: None,
            max_doublings: 3,
        }
    }
}

/// Box maximizer of `a·x`: `x_i = 1` exactly where `a_i > 0`. Returns the
/// point when its value reaches `beta`, `None` otherwise.
pub fn oracle_single_inequality(a: &[f64], beta: f64) -> Option<Vec<f64>> {
    let (x, value) = box_maximizer(a);
    (value >= beta - ORACLE_TOL).then_some(x)
}

fn box_maximizer(a: &[f64]) -> (Vec<f64>, f64) {
    let x: Vec<f64> = a.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
    let value = a.iter().filter(|&&v| v > 0.0).sum();
    (x, value)
}

/// `T = ⌈4ρ·ln m / ε²⌉`, at least one.
pub fn iteration_bound(rho: f64, m: usize, epsilon: f64) -> usize {
    let t = (4.0 * rho * (m as f64).ln() / (epsilon * epsilon)).ceil();
    (t as usize).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MwuOutcome {
    /// `A·x ≥ b − ε` holds componentwise.
    Feasible {
        x: Vec<f64>,
        iterations: usize,
        max_violation: f64,
    },
    /// No box point satisfies `pᵀA·x ≥ pᵀb`.
    Infeasible {
        certificate: Vec<f64>,
        iteration: usize,
    },
}

/// Checks that `p` certifies emptiness of `system` over the box.
pub fn is_infeasibility_certificate(system: &FeasibilitySystem, p: &[f64]) -> bool {
    let (a, beta) = aggregate(system, p);
    box_maximizer(&a).1 < beta - ORACLE_TOL
}

fn aggregate(system: &FeasibilitySystem, p: &[f64]) -> (Vec<f64>, f64) {
    let mut a = vec![0.0; system.num_vars];
    let mut beta = 0.0;
    for ((row, b), &pj) in system.rows.iter().zip(&system.rhs).zip(p) {
        for &(i, v) in row {
            a[i] += pj * v;
        }
        beta += pj * b;
    }
    (a, beta)
}

pub fn mwu_solve(system: &FeasibilitySystem, cfg: &MwuConfig) -> Result<MwuOutcome> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::InvalidArgument("epsilon must be positive".into()));
    }
    let m = system.num_rows();
    let n = system.num_vars;
    if m == 0 {
        return Ok(MwuOutcome::Feasible {
            x: vec![0.0; n],
            iterations: 0,
            max_violation: 0.0,
        });
    }
    let rho = cfg
        .rho
        .unwrap_or_else(|| system.width())
        .max(f64::MIN_POSITIVE);
    let eta = cfg.eta.unwrap_or(cfg.epsilon / (4.0 * rho));
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "step size {eta} outside (0, 1/2]"
        )));
    }
    let base = cfg
        .max_iters
        .unwrap_or_else(|| iteration_bound(rho, m, cfg.epsilon));
    let checkpoints: Vec<usize> = (0..=cfg.max_doublings).map(|k| base << k).collect();
    let last = *checkpoints.last().expect("at least one checkpoint");

    // log-domain weights so long runs never underflow
    let mut log_w = vec![0.0f64; m];
    let mut p = vec![1.0 / m as f64; m];
    let mut sum_x = vec![0.0; n];
    let mut next_check = 0;
    for t in 1..=last {
        let (a, beta) = aggregate(system, &p);
        let Some(x) = oracle_single_inequality(&a, beta) else {
            return Ok(MwuOutcome::Infeasible {
                certificate: p,
                iteration: t,
            });
        };
        for (s, v) in sum_x.iter_mut().zip(&x) {
            *s += v;
        }
        for (j, lw) in log_w.iter_mut().enumerate() {
            let e = (system.activity(j, &x) - system.rhs[j]) / rho;
            *lw += (1.0 - eta * e).ln();
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_w.iter().map(|l| (l - max).exp()).sum();
        for (pj, l) in p.iter_mut().zip(&log_w) {
            *pj = (l - max).exp() / total;
        }
        if t == checkpoints[next_check] {
            next_check += 1;
            let x_hat: Vec<f64> = sum_x.iter().map(|s| s / t as f64).collect();
            let viol = system.max_violation(&x_hat);
            if viol <= cfg.epsilon {
                return Ok(MwuOutcome::Feasible {
                    x: x_hat,
                    iterations: t,
                    max_violation: viol,
                });
            }
            if t == last {
                return Err(Error::ToleranceNotMet {
                    max_violation: viol,
                    iterations: t,
                });
            }
        }
    }
    unreachable!("the final checkpoint returns")
}

/// `min Σ|x_i − b̄_i|` over the LP relaxation of `inst`, i.e. `Δ·n`.
pub fn min_l1_distance(inst: &BlpInstance, bias: &[f64]) -> Result<f64> {
    let n = inst.num_vars();
    if bias.len() != n {
        return Err(Error::PredictionShape {
            expected: n,
            got: bias.len(),
        });
    }
    let mut cost = vec![0.0; n];
    cost.extend(std::iter::repeat_n(1.0, n));
    let mut rows: Vec<Vec<(usize, f64)>> = inst.rows().to_vec();
    let mut rhs = inst.rhs().to_vec();
    for (i, &b) in bias.iter().enumerate() {
        rows.push(vec![(i, 1.0), (n + i, -1.0)]);
        rhs.push(b);
        rows.push(vec![(i, -1.0), (n + i, -1.0)]);
        rhs.push(-b);
    }
    let lp = LinearProgram {
        cost,
        upper: vec![1.0; 2 * n],
        rows,
        rhs,
    };
    let res = lp.solve()?;
    match res.status {
        LpStatus::Optimal => Ok(res.objective.max(0.0)),
        LpStatus::Infeasible => Err(Error::InfeasibleRelaxation),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    /// Mean distance `Δ` of the closest relaxation point to the bias.
    pub delta: f64,
    pub mae: f64,
    pub epsilon: f64,
    /// Tolerance used for the inner feasibility run.
    pub inner_epsilon: f64,
    pub iterations: usize,
    pub passed: bool,
    pub x: Vec<f64>,
}

/// Runs MWU on `{A·x ≥ b, Σt ≤ Δ·n, t ≥ ±(x − b̄)}` over `(x, t)` and checks
/// `(1/n)·‖x̂ − b̄‖₁ ≤ Δ + ε`.
///
/// Every row of `A` is scaled to unit width and the budget row is divided
/// by `n`; positive scaling leaves the feasible set unchanged but keeps the
/// width near 3 whatever the instance data. The inner run uses `ε/2`: the
/// budget row and each distance row may each be violated by that much,
/// which keeps the final MAE within `Δ + ε`.
pub fn verify_mae_bound(inst: &BlpInstance, bias: &[f64], epsilon: f64) -> Result<MaeReport> {
    let n = inst.num_vars();
    if n == 0 {
        return Err(Error::InvalidArgument("instance has no variables".into()));
    }
    let l1 = min_l1_distance(inst, bias)?;
    let delta = l1 / n as f64;
    let base = FeasibilitySystem::from_instance(inst);
    let mut rows = Vec::with_capacity(base.rows.len() + 2 * n + 1);
    let mut rhs = Vec::with_capacity(rows.capacity());
    for (row, b) in base.rows.into_iter().zip(base.rhs) {
        let w = row.iter().map(|(_, a)| a.abs()).sum::<f64>() + b.abs();
        rows.push(row.into_iter().map(|(i, a)| (i, a / w)).collect());
        rhs.push(b / w);
    }
    let inv_n = 1.0 / n as f64;
    rows.push((0..n).map(|i| (n + i, -inv_n)).collect());
    rhs.push(-delta);
    for (i, &b) in bias.iter().enumerate() {
        rows.push(vec![(n + i, 1.0), (i, -1.0)]);
        rhs.push(-b);
        rows.push(vec![(n + i, 1.0), (i, 1.0)]);
        rhs.push(b);
    }
    let system = FeasibilitySystem::new(2 * n, rows, rhs)?;
    let inner = epsilon / 2.0;
    match mwu_solve(&system, &MwuConfig::new(inner))? {
        MwuOutcome::Feasible { x, iterations, .. } => {
            let xs = x[..n].to_vec();
            let mae = xs.iter().zip(bias).map(|(a, b)| (a - b).abs()).sum::<f64>() / n as f64;
            Ok(MaeReport {
                delta,
                mae,
                epsilon,
                inner_epsilon: inner,
                iterations,
                passed: mae <= delta + epsilon,
                x: xs,
            })
        }
        MwuOutcome::Infeasible { .. } => Err(Error::InfeasibleRelaxation),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_examples() {
        assert_eq!(
            oracle_single_inequality(&[1.0, 1.0], 1.0),
            Some(vec![1.0, 1.0])
        );
        assert_eq!(oracle_single_inequality(&[1.0, 1.0], 3.0), None);
        assert_eq!(
            oracle_single_inequality(&[-2.0, 0.0, 3.0], 3.0),
            Some(vec![0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn bound_examples() {
        assert_eq!(iteration_bound(1.0, 10, 0.1), 922);
        assert_eq!(iteration_bound(1.0, 3, 2.0), 2);
        assert_eq!(iteration_bound(5.0, 1, 0.1), 1);
        let t = iteration_bound(1.5, 7, 0.05);
        assert!([2 * t - 1, 2 * t].contains(&iteration_bound(3.0, 7, 0.05)));
    }

    #[test]
    fn slack_system() {
        let sys = FeasibilitySystem::new(
            2,
            vec![vec![(0, 1.0), (1, -1.0)], vec![(1, 2.0)]],
            vec![-1.0, -1.0],
        )
        .unwrap();
        match mwu_solve(&sys, &MwuConfig::new(0.05)).unwrap() {
            MwuOutcome::Feasible {
                x, max_violation, ..
            } => {
                assert_eq!(max_violation, 0.0);
                assert_eq!(sys.max_violation(&x), 0.0);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn infeasible_pair_certified() {
        let sys = FeasibilitySystem::new(1, vec![vec![(0, 1.0)], vec![(0, -1.0)]], vec![1.0, 0.0])
            .unwrap();
        assert!(is_infeasibility_certificate(&sys, &[0.5, 0.5]));
        match mwu_solve(&sys, &MwuConfig::new(0.05)).unwrap() {
            MwuOutcome::Infeasible { certificate, .. } => {
                assert!(is_infeasibility_certificate(&sys, &certificate));
                assert!((certificate.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn interval_distance() {
        // -x <= -0.6, i.e. x >= 0.6
        let inst = BlpInstance::new(
            vec!["x".into()],
            vec![0.0],
            vec!["c".into()],
            vec![vec![(0, -1.0)]],
            vec![-0.6],
        )
        .unwrap();
        assert!((min_l1_distance(&inst, &[0.2]).unwrap() - 0.4).abs() < 1e-9);
        assert!(min_l1_distance(&inst, &[0.7]).unwrap().abs() < 1e-9);
        let r = verify_mae_bound(&inst, &[0.2], 0.01).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.mae <= 0.41 + 1e-12);
    }
}
