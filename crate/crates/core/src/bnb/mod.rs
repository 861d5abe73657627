//! Branch-and-bound over binary fixings.
//!
//! Children are evaluated eagerly: a node's LP relaxation is solved when it
//! is created, so every open node carries its own bound. A node whose LP
//! optimum is integral closes immediately and offers its point as an
//! incumbent. Open nodes are kept in two ordered views (by bound and by
//! node score) plus a stack for depth-first search.

mod metrics;
mod pool;

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{self, WarmStartConfig};
use crate::model::{BlpInstance, FixingSet, VariableFixing};
use crate::simplex::{solve_relaxation, LpResult, LpStatus};

pub use metrics::{optimality_gap, primal_gap, primal_integral};
pub use pool::{collect_pool, within_tolerance, PoolConfig, SolutionPool};

/// Values closer than this to 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// A node is pruned when its bound is at least `incumbent − PRUNE_TOL`.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    BestBound,
    Dfs,
    NodeSelect,
    VarSelect,
    #[serde(rename = "warmstart+best-bound")]
    WarmStartBestBound,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::BestBound,
        Strategy::Dfs,
        Strategy::NodeSelect,
        Strategy::VarSelect,
        Strategy::WarmStartBestBound,
    ];

    pub fn needs_predictions(self) -> bool {
        matches!(
            self,
            Strategy::NodeSelect | Strategy::VarSelect | Strategy::WarmStartBestBound
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::BestBound => "best-bound",
            Strategy::Dfs => "dfs",
            Strategy::NodeSelect => "node-select",
            Strategy::VarSelect => "var-select",
            Strategy::WarmStartBestBound => "warmstart+best-bound",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub strategy: Strategy,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    pub predictions: Option<Vec<f64>>,
    /// node-select takes the best-bound node on every this-many-th selection.
    pub best_bound_interval: usize,
    /// The rounding heuristic runs on every this-many-th LP evaluation.
    pub rounding_interval: usize,
    pub warm_start: WarmStartConfig,
    /// Fixings applied at the root (used by warm-start repair).
    pub root_fixings: FixingSet,
    /// Time already spent before the search (e.g. model inference); it
    /// shifts every timestamp and counts against the time limit.
    pub time_offset: Duration,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::BestBound,
            time_limit: None,
            node_limit: None,
            predictions: None,
            best_bound_interval: 100,
            rounding_interval: 50,
            warm_start: WarmStartConfig::default(),
            root_fixings: FixingSet::new(),
            time_offset: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncumbentSource {
    LpIntegral,
    Rounding,
    Warmstart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    /// Seconds since the start of the solve.
    pub time: f64,
    pub objective: f64,
    pub found_via: IncumbentSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    Infeasible,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub strategy: Strategy,
    pub incumbents: Vec<Incumbent>,
    #[serde(with = "crate::io::json_f64")]
    pub best_bound: f64,
    #[serde(with = "crate::io::json_f64")]
    pub root_bound: f64,
    pub nodes_processed: usize,
    pub lp_solves: usize,
    #[serde(with = "crate::io::json_f64")]
    pub gap: f64,
    pub termination: Termination,
    pub elapsed: f64,
    pub best_solution: Option<Vec<bool>>,
}

impl SolveReport {
    pub fn best_objective(&self) -> Option<f64> {
        self.incumbents.last().map(|i| i.objective)
    }
}

/// Open search node.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub fixings: FixingSet,
    pub lp_bound: f64,
    pub depth: usize,
    pub node_score: f64,
    pub creation_index: usize,
    pub lp_primal: Vec<f64>,
}

#[derive(Default)]
struct OpenNodes {
    nodes: HashMap<usize, SearchNode>,
    by_bound: BTreeSet<(OrderedFloat<f64>, usize)>,
    by_score: BTreeSet<(Reverse<OrderedFloat<f64>>, usize)>,
    stack: Vec<usize>,
}

impl OpenNodes {
    fn push(&mut self, node: SearchNode) {
        let id = node.creation_index;
        self.by_bound.insert((OrderedFloat(node.lp_bound), id));
        self.by_score
            .insert((Reverse(OrderedFloat(node.node_score)), id));
        self.stack.push(id);
        self.nodes.insert(id, node);
    }

    fn take(&mut self, id: usize) -> SearchNode {
        let node = self.nodes.remove(&id).expect("open node");
        self.by_bound.remove(&(OrderedFloat(node.lp_bound), id));
        self.by_score
            .remove(&(Reverse(OrderedFloat(node.node_score)), id));
        node
    }

    fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }

    fn best_bound(&self) -> Option<f64> {
        self.by_bound.first().map(|(b, _)| b.0)
    }

    fn pop_best_bound(&mut self) -> Option<SearchNode> {
        let &(_, id) = self.by_bound.first()?;
        Some(self.take(id))
    }

    fn pop_best_score(&mut self) -> Option<SearchNode> {
        let &(_, id) = self.by_score.first()?;
        Some(self.take(id))
    }

    fn pop_stack(&mut self) -> Option<SearchNode> {
        while let Some(id) = self.stack.pop() {
            if self.nodes.contains_key(&id) {
                return Some(self.take(id));
            }
        }
        None
    }

    /// Drops every node whose bound cannot beat `incumbent`.
    fn prune(&mut self, incumbent: f64) {
        while let Some(&(b, id)) = self.by_bound.last() {
            if b.0 >= incumbent - PRUNE_TOL {
                self.take(id);
            } else {
                break;
            }
        }
        if self.stack.len() > 2 * self.nodes.len() + 64 {
            let nodes = &self.nodes;
            self.stack.retain(|id| nodes.contains_key(id));
        }
    }
}

struct Search<'a> {
    inst: &'a BlpInstance,
    cfg: &'a SolveConfig,
    start: Instant,
    incumbent: Option<(Vec<bool>, f64)>,
    incumbents: Vec<Incumbent>,
    open: OpenNodes,
    next_index: usize,
    lp_solves: usize,
    priorities: Option<Vec<f64>>,
}

/// Integral rounding of an LP point, if every entry is within tolerance.
fn integral_point(x: &[f64]) -> Option<Vec<bool>> {
    x.iter()
        .map(|&v| {
            if v <= INTEGRALITY_TOL {
                Some(false)
            } else if v >= 1.0 - INTEGRALITY_TOL {
                Some(true)
            } else {
                None
            }
        })
        .collect()
}

impl<'a> Search<'a> {
    fn elapsed(&self) -> Duration {
        self.cfg.time_offset + self.start.elapsed()
    }

    fn out_of_time(&self) -> bool {
        self.cfg.time_limit.is_some_and(|t| self.elapsed() >= t)
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(_, o)| *o)
    }

    fn offer(&mut self, x: Vec<bool>, via: IncumbentSource) -> bool {
        if !self.inst.is_feasible(&x) {
            return false;
        }
        let obj = self.inst.objective_value(&x);
        if obj >= self.incumbent_value() {
            return false;
        }
        let time = self.elapsed().as_secs_f64();
        self.incumbents.push(Incumbent {
            time,
            objective: obj,
            found_via: via,
        });
        self.incumbent = Some((x, obj));
        self.open.prune(obj);
        true
    }

    fn round_lp(&mut self, primal: &[f64]) {
        let nearest: Vec<bool> = primal.iter().map(|&v| v >= 0.5).collect();
        if self.inst.is_feasible(&nearest) {
            self.offer(nearest, IncumbentSource::Rounding);
            return;
        }
        let floor: Vec<bool> = primal.iter().map(|&v| v >= 1.0 - INTEGRALITY_TOL).collect();
        self.offer(floor, IncumbentSource::Rounding);
    }

    fn score_of(&self, fixings: &FixingSet) -> f64 {
        match &self.cfg.predictions {
            Some(p) if self.cfg.strategy == Strategy::NodeSelect => {
                guidance::node_score(fixings, p)
            }
            _ => 0.0,
        }
    }

    /// Solves a node's LP and either closes it or adds it to the open set.
    fn evaluate(
        &mut self,
        fixings: FixingSet,
        depth: usize,
        parent_score: Option<f64>,
        added: Option<VariableFixing>,
    ) -> Result<Option<f64>> {
        let lp: LpResult = solve_relaxation(self.inst, &fixings)?;
        let eval_index = self.lp_solves;
        self.lp_solves += 1;
        if lp.status == LpStatus::Infeasible {
            return Ok(None);
        }
        let bound = lp.objective;
        if self.cfg.rounding_interval > 0 && eval_index.is_multiple_of(self.cfg.rounding_interval) {
            self.round_lp(&lp.primal);
        }
        if let Some(x) = integral_point(&lp.primal) {
            if self.inst.is_feasible(&x) {
                self.offer(x, IncumbentSource::LpIntegral);
                return Ok(Some(bound));
            }
        }
        if bound >= self.incumbent_value() - PRUNE_TOL {
            return Ok(Some(bound));
        }
        if fixings.len() == self.inst.num_vars() {
            return Ok(Some(bound));
        }
        let node_score = match (parent_score, added, &self.cfg.predictions) {
            (Some(s), Some(f), Some(p)) if self.cfg.strategy == Strategy::NodeSelect => {
                s + guidance::fixing_score(f.value, p[f.var])
            }
            _ => self.score_of(&fixings),
        };
        let node = SearchNode {
            fixings,
            lp_bound: bound,
            depth,
            node_score,
            creation_index: self.next_index,
            lp_primal: lp.primal,
        };
        self.next_index += 1;
        self.open.push(node);
        Ok(Some(bound))
    }

    fn branching_variable(&self, node: &SearchNode) -> Option<usize> {
        let fixed = node.fixings.dense(self.inst.num_vars());
        let fractional: Vec<usize> = (0..self.inst.num_vars())
            .filter(|&i| {
                let v = node.lp_primal[i];
                fixed[i].is_none() && v > INTEGRALITY_TOL && v < 1.0 - INTEGRALITY_TOL
            })
            .collect();
        if fractional.is_empty() {
            return (0..self.inst.num_vars()).find(|&i| fixed[i].is_none());
        }
        if let Some(pr) = &self.priorities {
            return guidance::select_by_priority(&fractional, pr);
        }
        let mut best = fractional[0];
        let mut best_dist = f64::INFINITY;
        for &i in &fractional {
            let d = (node.lp_primal[i] - 0.5).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        Some(best)
    }

    fn select(&mut self, selections: usize) -> Option<SearchNode> {
        match self.cfg.strategy {
            Strategy::Dfs => self.open.pop_stack(),
            Strategy::NodeSelect => {
                let interval = self.cfg.best_bound_interval;
                if interval > 0 && selections.is_multiple_of(interval) {
                    self.open.pop_best_bound()
                } else {
                    self.open.pop_best_score()
                }
            }
            _ => self.open.pop_best_bound(),
        }
    }

    fn global_bound(&self) -> f64 {
        let inc = self.incumbent_value();
        self.open.best_bound().map_or(inc, |b| b.min(inc))
    }
}

fn validate(inst: &BlpInstance, cfg: &SolveConfig) -> Result<()> {
    if let Some(p) = &cfg.predictions {
        if p.len() != inst.num_vars() {
            return Err(Error::PredictionShape {
                expected: inst.num_vars(),
                got: p.len(),
            });
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(
                "predictions must lie in [0,1]".into(),
            ));
        }
    } else if cfg.strategy.needs_predictions() {
        return Err(Error::InvalidArgument(format!(
            "strategy {} needs predictions",
            cfg.strategy.name()
        )));
    }
    if cfg.root_fixings.iter().any(|f| f.var >= inst.num_vars()) {
        return Err(Error::InvalidArgument("root fixing out of range".into()));
    }
    Ok(())
}

/// Runs branch-and-bound on `inst` with the configured strategy.
pub fn solve(inst: &BlpInstance, cfg: &SolveConfig) -> Result<SolveReport> {
    validate(inst, cfg)?;
    let mut s = Search {
        inst,
        cfg,
        start: Instant::now(),
        incumbent: None,
        incumbents: Vec::new(),
        open: OpenNodes::default(),
        next_index: 0,
        lp_solves: 0,
        priorities: match cfg.strategy {
            Strategy::VarSelect => cfg
                .predictions
                .as_deref()
                .map(guidance::variable_priorities),
            _ => None,
        },
    };

    if cfg.strategy == Strategy::WarmStartBestBound {
        let preds = cfg.predictions.as_deref().expect("validated");
        let budget = cfg.time_limit.map(|t| t.saturating_sub(s.elapsed()));
        if let Some(ws) = guidance::warm_start_until(inst, preds, &cfg.warm_start, budget)? {
            s.offer(ws.solution, IncumbentSource::Warmstart);
        }
    }

    let root_score = s.score_of(&cfg.root_fixings);
    let depth = cfg.root_fixings.len();
    let root_bound = s
        .evaluate(cfg.root_fixings.clone(), depth, Some(root_score), None)?
        .unwrap_or(f64::INFINITY);

    let mut nodes_processed = 0usize;
    let mut selections = 0usize;
    let termination = loop {
        if s.open.is_empty() {
            break if s.incumbent.is_some() {
                Termination::Optimal
            } else {
                Termination::Infeasible
            };
        }
        if cfg.node_limit.is_some_and(|l| nodes_processed >= l) {
            break Termination::NodeLimit;
        }
        if s.out_of_time() {
            break Termination::TimeLimit;
        }
        selections += 1;
        let node = s.select(selections).expect("open set is nonempty");
        nodes_processed += 1;
        let Some(var) = s.branching_variable(&node) else {
            continue;
        };
        let up_first = node.lp_primal[var] >= 0.5;
        // the child explored first is pushed last so it sits on top of the stack
        let order = if up_first {
            [false, true]
        } else {
            [true, false]
        };
        for value in order {
            let f = VariableFixing::new(var, value);
            let fixings = node.fixings.with(f)?;
            s.evaluate(fixings, node.depth + 1, Some(node.node_score), Some(f))?;
        }
        log::trace!("node {nodes_processed}: open {}", s.open.len());
    };

    let best_bound = match termination {
        Termination::Optimal | Termination::Infeasible => s.incumbent_value(),
        _ => s.global_bound(),
    };
    let best_int = s.incumbent.as_ref().map(|(_, o)| *o);
    let gap = optimality_gap(best_bound, best_int);
    Ok(SolveReport {
        strategy: cfg.strategy,
        incumbents: s.incumbents.clone(),
        best_bound,
        root_bound,
        nodes_processed,
        lp_solves: s.lp_solves,
        gap,
        termination,
        elapsed: s.elapsed().as_secs_f64(),
        best_solution: s.incumbent.map(|(x, _)| x),
    })
}
