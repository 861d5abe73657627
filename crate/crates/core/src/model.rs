//! Canonical binary linear programs and their bipartite encoding.
//!
//! Every instance is stored as `min c·x  s.t.  A x ≤ b,  x ∈ {0,1}^n` with
//! sparse rows. Raw input (any objective sense, mixed row senses) is brought
//! into this form by [`canonicalize`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used when checking a point against the constraints.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarType {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// An instance as written by the user, before canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInstance {
    pub sense: Sense,
    pub var_names: Vec<String>,
    pub var_types: Vec<VarType>,
    pub objective: Vec<f64>,
    pub rows: Vec<RawRow>,
}

/// A binary LP in canonical `min / ≤` form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlpInstance {
    var_names: Vec<String>,
    cons_names: Vec<String>,
    objective: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl BlpInstance {
    /// Builds an instance, merging duplicate terms, dropping zero
    /// coefficients and sorting each row by variable index.
    pub fn new(
        var_names: Vec<String>,
        objective: Vec<f64>,
        cons_names: Vec<String>,
        rows: Vec<Vec<(usize, f64)>>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = var_names.len();
        if objective.len() != n {
            return Err(Error::InvalidArgument(format!(
                "objective has {} entries for {} variables",
                objective.len(),
                n
            )));
        }
        if rows.len() != rhs.len() || rows.len() != cons_names.len() {
            return Err(Error::InvalidArgument(
                "rows, rhs and constraint names differ in length".into(),
            ));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (row, name) in rows.into_iter().zip(&cons_names) {
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            for (var, coef) in row {
                if var >= n {
                    return Err(Error::InvalidArgument(format!(
                        "row `{name}` references variable {var} of {n}"
                    )));
                }
                *merged.entry(var).or_insert(0.0) += coef;
            }
            let terms: Vec<(usize, f64)> = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
            if terms.is_empty() {
                return Err(Error::EmptyRow { name: name.clone() });
            }
            clean.push(terms);
        }
        Ok(Self {
            var_names,
            cons_names,
            objective,
            rows: clean,
            rhs,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn num_cons(&self) -> usize {
        self.rows.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn cons_names(&self) -> &[String] {
        &self.cons_names
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &[(usize, f64)] {
        &self.rows[j]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn objective_value(&self, x: &[bool]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .filter(|(_, &xi)| xi)
            .map(|(c, _)| *c)
            .sum()
    }

    pub fn objective_value_f(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, j: usize, x: &[f64]) -> f64 {
        self.rows[j].iter().map(|&(i, a)| a * x[i]).sum()
    }

    /// Largest amount by which `x` exceeds a right-hand side (0 if feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_cons())
            .map(|j| self.row_activity(j, x) - self.rhs[j])
            .fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, x: &[bool]) -> bool {
        x.len() == self.num_vars()
            && self.rows.iter().zip(&self.rhs).all(|(row, &b)| {
                let act: f64 = row.iter().filter(|(i, _)| x[*i]).map(|(_, a)| *a).sum();
                act <= b + FEAS_TOL
            })
    }

    /// Returns the same instance with variables relabelled so that old
    /// variable `i` becomes `perm[i]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Self {
        let n = self.num_vars();
        assert_eq!(perm.len(), n);
        let mut names = vec![String::new(); n];
        let mut obj = vec![0.0; n];
        for i in 0..n {
            names[perm[i]] = self.var_names[i].clone();
            obj[perm[i]] = self.objective[i];
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut t: Vec<_> = r.iter().map(|&(i, a)| (perm[i], a)).collect();
                t.sort_by_key(|&(i, _)| i);
                t
            })
            .collect();
        Self {
            var_names: names,
            cons_names: self.cons_names.clone(),
            objective: obj,
            rows,
            rhs: self.rhs.clone(),
        }
    }
}

/// Brings a raw instance into `min / ≤` form.
///
/// Maximization is negated, `≥` rows are negated and `=` rows are split into
/// a `≤` pair named `<row>__le` and `<row>__ge`.
pub fn canonicalize(raw: &RawInstance) -> Result<BlpInstance> {
    for (name, ty) in raw.var_names.iter().zip(&raw.var_types) {
        if *ty != VarType::Binary {
            return Err(Error::UnsupportedVariableType { name: name.clone() });
        }
    }
    let objective = match raw.sense {
        Sense::Minimize => raw.objective.clone(),
        Sense::Maximize => raw.objective.iter().map(|c| -c).collect(),
    };
    let mut names = Vec::new();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let negated = |t: &[(usize, f64)]| t.iter().map(|&(i, a)| (i, -a)).collect::<Vec<_>>();
    for row in &raw.rows {
        if row.terms.iter().all(|&(_, a)| a == 0.0) {
            return Err(Error::EmptyRow {
                name: row.name.clone(),
            });
        }
        match row.sense {
            RowSense::Le => {
                names.push(row.name.clone());
                rows.push(row.terms.clone());
                rhs.push(row.rhs);
            }
            RowSense::Ge => {
                names.push(row.name.clone());
                rows.push(negated(&row.terms));
                rhs.push(-row.rhs);
            }
            RowSense::Eq => {
                names.push(format!("{}__le", row.name));
                rows.push(row.terms.clone());
                rhs.push(row.rhs);
                names.push(format!("{}__ge", row.name));
                rows.push(negated(&row.terms));
                rhs.push(-row.rhs);
            }
        }
    }
    BlpInstance::new(raw.var_names.clone(), objective, names, rows, rhs)
}

/// A variable fixed to 0 or 1 by branching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariableFixing {
    pub var: usize,
    pub value: bool,
}

impl VariableFixing {
    pub fn new(var: usize, value: bool) -> Self {
        Self { var, value }
    }
}

/// A set of fixings, at most one per variable, kept sorted by variable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FixingSet(Vec<VariableFixing>);

impl FixingSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_fixings(fixings: impl IntoIterator<Item = VariableFixing>) -> Result<Self> {
        let mut set = Self::new();
        for f in fixings {
            set.insert(f)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, f: VariableFixing) -> Result<()> {
        match self.0.binary_search_by_key(&f.var, |g| g.var) {
            Ok(_) => Err(Error::InvalidArgument(format!(
                "variable {} fixed twice",
                f.var
            ))),
            Err(pos) => {
                self.0.insert(pos, f);
                Ok(())
            }
        }
    }

    /// Copy of `self` plus one more fixing.
    pub fn with(&self, f: VariableFixing) -> Result<Self> {
        let mut s = self.clone();
        s.insert(f)?;
        Ok(s)
    }

    pub fn get(&self, var: usize) -> Option<bool> {
        self.0
            .binary_search_by_key(&var, |g| g.var)
            .ok()
            .map(|p| self.0[p].value)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VariableFixing> {
        self.0.iter()
    }

    /// Per-variable view: `None` for free variables.
    pub fn dense(&self, n: usize) -> Vec<Option<bool>> {
        let mut v = vec![None; n];
        for f in &self.0 {
            v[f.var] = Some(f.value);
        }
        v
    }
}

/// Variable/constraint bipartite graph of an instance.
///
/// Edges are stored row-major (by constraint, then variable). Raw
/// coefficients, objective and right-hand side are kept alongside the
/// standardized node and edge features so the instance can be rebuilt and
/// residuals can be evaluated against the true constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub num_vars: usize,
    pub num_cons: usize,
    pub edge_var: Vec<usize>,
    pub edge_cons: Vec<usize>,
    pub edge_coef: Vec<f64>,
    pub var_edges: Vec<Vec<usize>>,
    pub cons_edges: Vec<Vec<usize>>,
    pub objective: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Per variable node: (objective coefficient, degree), standardized.
    pub var_features: Vec<[f64; 2]>,
    /// Per constraint node: (right-hand side, degree), standardized.
    pub cons_features: Vec<[f64; 2]>,
    /// Per edge: constraint coefficient, standardized.
    pub edge_features: Vec<f64>,
}

impl BipartiteGraph {
    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn var_degree(&self, i: usize) -> usize {
        self.var_edges[i].len()
    }

    pub fn cons_degree(&self, j: usize) -> usize {
        self.cons_edges[j].len()
    }

    /// Rebuilds `(rows, rhs, objective)` from the stored edges.
    pub fn reconstruct(&self) -> (SparseRows, Vec<f64>, Vec<f64>) {
        let rows = self
            .cons_edges
            .iter()
            .map(|es| {
                es.iter()
                    .map(|&e| (self.edge_var[e], self.edge_coef[e]))
                    .collect()
            })
            .collect();
        (rows, self.rhs.clone(), self.objective.clone())
    }
}

/// One `(variable, coefficient)` list per constraint row.
pub type SparseRows = Vec<Vec<(usize, f64)>>;

/// One node per variable and constraint, one edge per stored nonzero.
/// Features are left at zero; see [`compute_features`].
pub fn encode_bipartite(inst: &BlpInstance) -> BipartiteGraph {
    let n = inst.num_vars();
    let m = inst.num_cons();
    let nnz = inst.nnz();
    let mut edge_var = Vec::with_capacity(nnz);
    let mut edge_cons = Vec::with_capacity(nnz);
    let mut edge_coef = Vec::with_capacity(nnz);
    let mut var_edges = vec![Vec::new(); n];
    let mut cons_edges = vec![Vec::new(); m];
    for (j, row) in inst.rows().iter().enumerate() {
        for &(i, a) in row {
            let e = edge_var.len();
            edge_var.push(i);
            edge_cons.push(j);
            edge_coef.push(a);
            var_edges[i].push(e);
            cons_edges[j].push(e);
        }
    }
    BipartiteGraph {
        num_vars: n,
        num_cons: m,
        edge_var,
        edge_cons,
        edge_coef,
        var_edges,
        cons_edges,
        objective: inst.objective().to_vec(),
        rhs: inst.rhs().to_vec(),
        var_features: vec![[0.0; 2]; n],
        cons_features: vec![[0.0; 2]; m],
        edge_features: vec![0.0; nnz],
    }
}

/// Unstandardized features of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub var: Vec<[f64; 2]>,
    pub cons: Vec<[f64; 2]>,
    pub edge: Vec<f64>,
}

pub fn raw_features(graph: &BipartiteGraph) -> RawFeatures {
    RawFeatures {
        var: (0..graph.num_vars)
            .map(|i| [graph.objective[i], graph.var_degree(i) as f64])
            .collect(),
        cons: (0..graph.num_cons)
            .map(|j| [graph.rhs[j], graph.cons_degree(j) as f64])
            .collect(),
        edge: graph.edge_coef.clone(),
    }
}

/// Per-instance z-score; a constant column maps to all zeros.
pub fn standardize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
}

fn standardize_pairs(rows: &mut [[f64; 2]]) {
    for col in 0..2 {
        let mut c: Vec<f64> = rows.iter().map(|r| r[col]).collect();
        standardize(&mut c);
        for (r, v) in rows.iter_mut().zip(c) {
            r[col] = v;
        }
    }
}

/// Fills standardized node and edge features.
pub fn compute_features(mut graph: BipartiteGraph) -> BipartiteGraph {
    let RawFeatures {
        mut var,
        mut cons,
        mut edge,
    } = raw_features(&graph);
    standardize_pairs(&mut var);
    standardize_pairs(&mut cons);
    standardize(&mut edge);
    graph.var_features = var;
    graph.cons_features = cons;
    graph.edge_features = edge;
    graph
}

/// `encode_bipartite` followed by `compute_features`.
pub fn featurized_graph(inst: &BlpInstance) -> BipartiteGraph {
    compute_features(encode_bipartite(inst))
}
