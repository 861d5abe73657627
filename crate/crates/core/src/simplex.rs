//! Bounded-variable primal simplex on a dense tableau.
//!
//! Solves `min c·x  s.t.  A x ≤ b,  0 ≤ x ≤ u` where `u` may be infinite.
//! Rows with negative right-hand side get an artificial variable and a
//! phase-1 objective; after phase 1 artificials are clamped to `[0, 0]`.
//! Pricing is Dantzig's rule; after `5·(n+m)` consecutive degenerate pivots
//! the solver falls back to Bland's rule until the next strict improvement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlpInstance, FixingSet};

pub const PRIMAL_TOL: f64 = 1e-7;
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective of `primal`; `+∞` when infeasible.
    pub objective: f64,
    pub primal: Vec<f64>,
}

impl LpResult {
    fn infeasible(n: usize) -> Self {
        Self {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            primal: vec![0.0; n],
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// A general `min c·x, A x ≤ b, 0 ≤ x ≤ upper` problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub cost: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn solve(&self) -> Result<LpResult> {
        Tableau::build(self).run(self)
    }
}

/// LP relaxation of `inst` with `fixings` substituted out.
pub fn solve_relaxation(inst: &BlpInstance, fixings: &FixingSet) -> Result<LpResult> {
    let n = inst.num_vars();
    let fixed = fixings.dense(n);
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut col_of = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        col_of[i] = k;
    }
    let mut constant = 0.0;
    for (i, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            constant += inst.objective()[i];
        }
    }
    let mut rows = Vec::with_capacity(inst.num_cons());
    let mut rhs = Vec::with_capacity(inst.num_cons());
    for (row, &b) in inst.rows().iter().zip(inst.rhs()) {
        let mut r = b;
        let mut terms = Vec::with_capacity(row.len());
        for &(i, a) in row {
            match fixed[i] {
                Some(true) => r -= a,
                Some(false) => {}
                None => terms.push((col_of[i], a)),
            }
        }
        if terms.is_empty() {
            if r < -PRIMAL_TOL {
                return Ok(LpResult::infeasible(n));
            }
            continue;
        }
        rows.push(terms);
        rhs.push(r);
    }
    let lp = LinearProgram {
        cost: free.iter().map(|&i| inst.objective()[i]).collect(),
        upper: vec![1.0; free.len()],
        rows,
        rhs,
    };
    let sub = lp.solve()?;
    if !sub.is_optimal() {
        return Ok(LpResult::infeasible(n));
    }
    let mut primal = vec![0.0; n];
    for (i, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            primal[i] = 1.0;
        }
    }
    for (k, &i) in free.iter().enumerate() {
        primal[i] = sub.primal[k];
    }
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective: sub.objective + constant,
        primal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ColState {
    Basic(usize),
    Lower,
    Upper,
}

struct Tableau {
    m: usize,
    width: usize,
    n_struct: usize,
    n_art: usize,
    /// Row-major `m × width` matrix `B⁻¹ [A | I | ±I_art]`.
    t: Vec<f64>,
    /// Values of the basic variables.
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    upper: Vec<f64>,
    reduced: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let negative: Vec<usize> = (0..m).filter(|&j| lp.rhs[j] < 0.0).collect();
        let n_art = negative.len();
        let width = n + m + n_art;
        let mut t = vec![0.0; m * width];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut state = vec![ColState::Lower; width];
        let mut upper = lp.upper.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, m + n_art));
        let mut art = 0;
        for j in 0..m {
            let row = &mut t[j * width..(j + 1) * width];
            let sign = if lp.rhs[j] < 0.0 { -1.0 } else { 1.0 };
            for &(i, a) in &lp.rows[j] {
                row[i] += sign * a;
            }
            row[n + j] = sign;
            beta[j] = sign * lp.rhs[j];
            if sign < 0.0 {
                let col = n + m + art;
                row[col] = 1.0;
                basis[j] = col;
                art += 1;
            } else {
                basis[j] = n + j;
            }
            state[basis[j]] = ColState::Basic(j);
        }
        Self {
            m,
            width,
            n_struct: n,
            n_art,
            t,
            beta,
            basis,
            state,
            upper,
            reduced: vec![0.0; width],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.reduced.copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * self.width..(r + 1) * self.width];
                for (d, &a) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
    }

    fn nonbasic_value(&self, col: usize) -> f64 {
        match self.state[col] {
            ColState::Upper => self.upper[col],
            _ => 0.0,
        }
    }

    /// Runs one phase to optimality with the given cost vector.
    fn optimize(&mut self, cost: &[f64]) -> Result<()> {
        self.price(cost);
        let threshold = 5 * (self.n_struct + self.m);
        let max_iters = 50 * (self.width + self.m) + 1000;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iters {
            let bland = degenerate_run >= threshold;
            let Some((enter, dir)) = self.choose_entering(bland) else {
                return Ok(());
            };
            let step = self.ratio_test(enter, dir, bland)?;
            if step.theta <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.apply(enter, dir, step);
        }
        Err(Error::NumericalFailure(format!(
            "no convergence within {max_iters} pivots"
        )))
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for col in 0..self.width {
            if self.upper[col] <= 0.0 {
                continue;
            }
            let d = self.reduced[col];
            let dir = match self.state[col] {
                ColState::Basic(_) => continue,
                ColState::Lower if d < -OPT_TOL => 1.0,
                ColState::Upper if d > OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((col, dir));
            }
            if best.is_none_or(|(_, _, g)| d.abs() > g) {
                best = Some((col, dir, d.abs()));
            }
        }
        best.map(|(c, d, _)| (c, d))
    }

    fn ratio_test(&self, enter: usize, dir: f64, bland: bool) -> Result<Step> {
        let mut theta = self.upper[enter];
        let mut leave: Option<(usize, bool)> = None;
        let mut leave_alpha = 0.0f64;
        for r in 0..self.m {
            let alpha = self.t[r * self.width + enter];
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            // basic value moves by -dir * alpha * theta
            let delta = -dir * alpha;
            let basic = self.basis[r];
            let (limit, to_upper) = if delta < 0.0 {
                ((self.beta[r] / -delta).max(0.0), false)
            } else {
                let u = self.upper[basic];
                if u.is_infinite() {
                    continue;
                }
                (((u - self.beta[r]) / delta).max(0.0), true)
            };
            let take = match leave {
                None => limit < theta,
                Some((lr, _)) => {
                    limit < theta - DEGENERATE_STEP
                        || (limit <= theta + DEGENERATE_STEP
                            && if bland {
                                basic < self.basis[lr]
                            } else {
                                alpha.abs() > leave_alpha
                            })
                }
            };
            if take {
                theta = if leave.is_none() {
                    limit
                } else {
                    theta.min(limit)
                };
                leave = Some((r, to_upper));
                leave_alpha = alpha.abs();
            }
        }
        if theta.is_infinite() {
            return Err(Error::NumericalFailure("unbounded direction".into()));
        }
        Ok(Step { theta, leave })
    }

    fn apply(&mut self, enter: usize, dir: f64, step: Step) {
        let w = self.width;
        let theta = step.theta;
        for r in 0..self.m {
            let alpha = self.t[r * w + enter];
            if alpha != 0.0 {
                self.beta[r] -= dir * alpha * theta;
            }
        }
        let Some((pr, to_upper)) = step.leave else {
            self.state[enter] = match self.state[enter] {
                ColState::Lower => ColState::Upper,
                _ => ColState::Lower,
            };
            return;
        };
        let entering_value = self.nonbasic_value(enter) + dir * theta;
        let leaving = self.basis[pr];
        self.state[leaving] = if to_upper {
            ColState::Upper
        } else {
            ColState::Lower
        };
        self.basis[pr] = enter;
        self.state[enter] = ColState::Basic(pr);
        self.beta[pr] = entering_value;

        let piv = self.t[pr * w + enter];
        let inv = 1.0 / piv;
        let nz: Vec<usize> = {
            let row = &mut self.t[pr * w..(pr + 1) * w];
            let mut nz = Vec::new();
            for (c, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push(c);
                }
            }
            nz
        };
        self.t[pr * w + enter] = 1.0;
        let (head, rest) = self.t.split_at_mut(pr * w);
        let (prow, tail) = rest.split_at_mut(w);
        for row in head.chunks_exact_mut(w).chain(tail.chunks_exact_mut(w)) {
            let f = row[enter];
            if f == 0.0 {
                continue;
            }
            for &c in &nz {
                row[c] -= f * prow[c];
            }
            row[enter] = 0.0;
        }
        let f = self.reduced[enter];
        if f != 0.0 {
            for &c in &nz {
                self.reduced[c] -= f * prow[c];
            }
            self.reduced[enter] = 0.0;
        }
    }

    fn column_values(&self) -> Vec<f64> {
        (0..self.width)
            .map(|c| match self.state[c] {
                ColState::Basic(r) => self.beta[r],
                ColState::Lower => 0.0,
                ColState::Upper => self.upper[c],
            })
            .collect()
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpResult> {
        let n = self.n_struct;
        if self.n_art > 0 {
            let mut phase1 = vec![0.0; self.width];
            phase1[n + self.m..].iter_mut().for_each(|c| *c = 1.0);
            self.optimize(&phase1)?;
            let infeas: f64 = self.column_values()[n + self.m..].iter().sum();
            let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            if infeas > PRIMAL_TOL * scale {
                return Ok(LpResult::infeasible(n));
            }
            for c in n + self.m..self.width {
                self.upper[c] = 0.0;
            }
        }
        let mut cost = lp.cost.clone();
        cost.resize(self.width, 0.0);
        self.optimize(&cost)?;
        let values = self.column_values();
        let primal: Vec<f64> = values[..n]
            .iter()
            .zip(&lp.upper)
            .map(|(&v, &u)| v.clamp(0.0, u))
            .collect();
        let objective = lp.cost.iter().zip(&primal).map(|(c, x)| c * x).sum();
        let violation = lp
            .rows
            .iter()
            .zip(&lp.rhs)
            .map(|(row, b)| row.iter().map(|&(i, a)| a * primal[i]).sum::<f64>() - b)
            .fold(0.0f64, f64::max);
        if violation > PRIMAL_TOL {
            return Err(Error::NumericalFailure(format!(
                "final point violates a row by {violation:.3e}"
            )));
        }
        Ok(LpResult {
            status: LpStatus::Optimal,
            objective,
            primal,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    theta: f64,
    /// Leaving row and whether the leaving variable ends at its upper bound.
    leave: Option<(usize, bool)>,
}
