//! Near-optimal solution pools.
//!
//! The pool search is a branch-and-bound that never stops at the first
//! optimum: a node is discarded only when its LP bound exceeds the current
//! cutoff `best + ε·|best|`, and nodes with an integral LP point keep
//! branching on free variables so neighbouring solutions are enumerated.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::{integral_point, INTEGRALITY_TOL};
use crate::error::{Error, Result};
use crate::model::{BlpInstance, FixingSet, VariableFixing};
use crate::simplex::{solve_relaxation, LpStatus};

/// Slack on the cutoff when pruning, so no qualifying point is lost to
/// LP round-off.
const CUTOFF_SLACK: f64 = 1e-7;

/// Whether `objective` lies within `epsilon·|best|` of `best`.
pub fn within_tolerance(objective: f64, best: f64, epsilon: f64) -> bool {
    (objective - best).abs() <= epsilon * best.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub epsilon: f64,
    /// Stop once this many solutions are pooled; `None` enumerates all.
    pub target: Option<usize>,
    pub time_limit: Option<Duration>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            target: Some(1000),
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPool {
    pub solutions: Vec<Vec<bool>>,
    pub objectives: Vec<f64>,
    pub epsilon: f64,
    pub target_count: Option<usize>,
    /// True when the search tree was exhausted (the pool is the whole
    /// near-optimal set).
    pub complete: bool,
}

impl SolutionPool {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn best(&self) -> Option<f64> {
        self.objectives.iter().copied().reduce(f64::min)
    }
}

struct PoolState {
    epsilon: f64,
    best: f64,
    entries: Vec<(Vec<bool>, f64)>,
    seen: HashSet<Vec<bool>>,
}

impl PoolState {
    fn cutoff(&self) -> f64 {
        if self.best.is_finite() {
            self.best + self.epsilon * self.best.abs()
        } else {
            f64::INFINITY
        }
    }

    fn record(&mut self, inst: &BlpInstance, x: Vec<bool>) {
        if !inst.is_feasible(&x) || self.seen.contains(&x) {
            return;
        }
        let obj = inst.objective_value(&x);
        if obj < self.best {
            self.best = obj;
            let (best, eps) = (self.best, self.epsilon);
            self.entries
                .retain(|(_, o)| within_tolerance(*o, best, eps));
        }
        if within_tolerance(obj, self.best, self.epsilon) {
            self.seen.insert(x.clone());
            self.entries.push((x, obj));
        }
    }
}

struct PoolNode {
    fixings: FixingSet,
    primal: Vec<f64>,
}

/// Collects distinct feasible solutions within `epsilon` of the best found.
pub fn collect_pool(inst: &BlpInstance, cfg: &PoolConfig) -> Result<SolutionPool> {
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(
            "pool epsilon must be nonnegative".into(),
        ));
    }
    let start = Instant::now();
    let n = inst.num_vars();
    let mut state = PoolState {
        epsilon: cfg.epsilon,
        best: f64::INFINITY,
        entries: Vec::new(),
        seen: HashSet::new(),
    };
    let mut open: BTreeSet<(OrderedFloat<f64>, usize)> = BTreeSet::new();
    let mut store: Vec<Option<PoolNode>> = Vec::new();

    let evaluate = |fixings: FixingSet,
                    state: &mut PoolState,
                    open: &mut BTreeSet<(OrderedFloat<f64>, usize)>,
                    store: &mut Vec<Option<PoolNode>>|
     -> Result<()> {
        let lp = solve_relaxation(inst, &fixings)?;
        if lp.status == LpStatus::Infeasible || lp.objective > state.cutoff() + CUTOFF_SLACK {
            return Ok(());
        }
        if let Some(x) = integral_point(&lp.primal) {
            state.record(inst, x);
        }
        if fixings.len() == n {
            return Ok(());
        }
        open.insert((OrderedFloat(lp.objective), store.len()));
        store.push(Some(PoolNode {
            fixings,
            primal: lp.primal,
        }));
        Ok(())
    };

    evaluate(FixingSet::new(), &mut state, &mut open, &mut store)?;
    let mut complete = true;
    while let Some((bound, id)) = open.pop_first() {
        if cfg.target.is_some_and(|t| state.entries.len() >= t)
            || cfg.time_limit.is_some_and(|t| start.elapsed() >= t)
        {
            complete = false;
            break;
        }
        let node = store[id].take().expect("open pool node");
        if bound.0 > state.cutoff() + CUTOFF_SLACK {
            continue;
        }
        let fixed = node.fixings.dense(n);
        let fractional = (0..n)
            .filter(|&i| fixed[i].is_none())
            .map(|i| (i, (node.primal[i] - 0.5).abs()))
            .filter(|&(_, d)| d < 0.5 - INTEGRALITY_TOL)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        let var = fractional
            .or_else(|| (0..n).find(|&i| fixed[i].is_none()))
            .expect("node with free variables");
        for value in [false, true] {
            let fixings = node.fixings.with(VariableFixing::new(var, value))?;
            evaluate(fixings, &mut state, &mut open, &mut store)?;
        }
    }
    if !open.is_empty() {
        complete = false;
    }
    if state.entries.is_empty() {
        return Err(Error::EmptyPool);
    }
    let (solutions, objectives) = state.entries.into_iter().unzip();
    Ok(SolutionPool {
        solutions,
        objectives,
        epsilon: cfg.epsilon,
        target_count: cfg.target,
        complete,
    })
}
