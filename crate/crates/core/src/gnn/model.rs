//! Bipartite message-passing network.
//!
//! Each round first updates constraint embeddings from adjacent variables
//! (v-to-c) and then variable embeddings from the freshly updated
//! constraints (c-to-v). Error variants append the softmax-normalized
//! residual `e_j` of the current soft assignment as the last message input.
//! The input features and all per-round variable embeddings are
//! concatenated and fed to a four-layer MLP that emits one logit per
//! variable.

use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{sigmoid, softmax, SparseRows, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::generate::rng_for;
use crate::model::BipartiteGraph;

pub const HIDDEN_DIM: usize = 64;
pub const NUM_ROUNDS: usize = 4;
/// Width of the raw node features (objective or rhs, degree).
pub const INPUT_DIM: usize = 2;
pub const OUTPUT_LAYERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    SageErr,
    SagePlain,
    EcErr,
    EcPlain,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::SageErr,
        Architecture::SagePlain,
        Architecture::EcErr,
        Architecture::EcPlain,
    ];

    pub fn uses_error(self) -> bool {
        matches!(self, Architecture::SageErr | Architecture::EcErr)
    }

    pub fn is_sage(self) -> bool {
        matches!(self, Architecture::SageErr | Architecture::SagePlain)
    }

    /// Same family without error messages.
    pub fn plain(self) -> Self {
        if self.is_sage() {
            Architecture::SagePlain
        } else {
            Architecture::EcPlain
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Architecture::SageErr => "sage-err",
            Architecture::SagePlain => "sage-plain",
            Architecture::EcErr => "ec-err",
            Architecture::EcPlain => "ec-plain",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown architecture `{s}`")))
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Sage {
        msg: usize,
        edge1: Linear,
        edge2: Linear,
        self_w: usize,
        agg_w: usize,
        bias: usize,
    },
    Ec {
        h1: Linear,
        h2: Linear,
    },
}

#[derive(Debug, Clone)]
struct Round {
    v2c: Side,
    asg: Option<Linear>,
    c2v: Side,
}

#[derive(Debug, Clone)]
struct Layout {
    rounds: Vec<Round>,
    out: Vec<Linear>,
}

/// Parameter name and shape, in storage order.
pub type ParamSpec = (String, usize, usize);

struct LayoutBuilder {
    specs: Vec<ParamSpec>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.specs.push((name, rows, cols));
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.add(format!("{prefix}.w"), fan_in, fan_out),
            b: self.add(format!("{prefix}.b"), 1, fan_out),
        }
    }

    fn side(
        &mut self,
        prefix: &str,
        sage: bool,
        dst_dim: usize,
        src_dim: usize,
        edge_dim: usize,
        h: usize,
    ) -> Side {
        if sage {
            Side::Sage {
                msg: self.add(format!("{prefix}.msg.w"), src_dim, h),
                edge1: self.linear(&format!("{prefix}.edge1"), edge_dim, h),
                edge2: self.linear(&format!("{prefix}.edge2"), h, h),
                self_w: self.add(format!("{prefix}.self.w"), dst_dim, h),
                agg_w: self.add(format!("{prefix}.agg.w"), h, h),
                bias: self.add(format!("{prefix}.merge.b"), 1, h),
            }
        } else {
            Side::Ec {
                h1: self.linear(&format!("{prefix}.h1"), dst_dim + src_dim + edge_dim, h),
                h2: self.linear(&format!("{prefix}.h2"), h, h),
            }
        }
    }
}

fn build_layout(arch: Architecture, hidden: usize, rounds: usize) -> (Layout, Vec<ParamSpec>) {
    let mut b = LayoutBuilder { specs: Vec::new() };
    let sage = arch.is_sage();
    let c2v_edge = if arch.uses_error() { 3 } else { 2 };
    let mut layout = Layout {
        rounds: Vec::with_capacity(rounds),
        out: Vec::with_capacity(OUTPUT_LAYERS),
    };
    for t in 0..rounds {
        let d = if t == 0 { INPUT_DIM } else { hidden };
        let v2c = b.side(&format!("r{t}.v2c"), sage, d, d, 2, hidden);
        let asg = arch
            .uses_error()
            .then(|| b.linear(&format!("r{t}.asg"), d, 1));
        let c2v = b.side(&format!("r{t}.c2v"), sage, d, hidden, c2v_edge, hidden);
        layout.rounds.push(Round { v2c, asg, c2v });
    }
    let mut fan_in = INPUT_DIM + rounds * hidden;
    for l in 0..OUTPUT_LAYERS {
        let fan_out = if l + 1 == OUTPUT_LAYERS { 1 } else { hidden };
        layout
            .out
            .push(b.linear(&format!("out{l}"), fan_in, fan_out));
        fan_in = fan_out;
    }
    (layout, b.specs)
}

/// Graph data in the form consumed by the network.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub num_vars: usize,
    pub num_cons: usize,
    var_x: Tensor,
    cons_x: Tensor,
    edge_ab: Tensor,
    edge_var: Rc<[usize]>,
    edge_cons: Rc<[usize]>,
    var_edges: Rc<[Vec<usize>]>,
    cons_edges: Rc<[Vec<usize>]>,
    residual: Rc<SparseRows>,
}

impl GraphInputs {
    pub fn new(graph: &BipartiteGraph) -> Result<Self> {
        let (n, m, e) = (graph.num_vars, graph.num_cons, graph.num_edges());
        let consistent = graph.var_features.len() == n
            && graph.cons_features.len() == m
            && graph.edge_features.len() == e
            && graph.edge_cons.len() == e
            && graph.edge_coef.len() == e
            && graph.var_edges.len() == n
            && graph.cons_edges.len() == m
            && graph.rhs.len() == m
            && graph.edge_var.iter().all(|&i| i < n)
            && graph.edge_cons.iter().all(|&j| j < m);
        if !consistent {
            return Err(Error::ModelShape(
                "bipartite graph arrays are inconsistent".into(),
            ));
        }
        let flat = |rows: &[[f64; 2]]| rows.iter().flat_map(|r| r.iter().copied()).collect();
        let edge_ab = (0..e)
            .flat_map(|k| {
                [
                    graph.edge_features[k],
                    graph.cons_features[graph.edge_cons[k]][0],
                ]
            })
            .collect();
        let rows = graph
            .cons_edges
            .iter()
            .map(|es| {
                es.iter()
                    .map(|&k| (graph.edge_var[k], graph.edge_coef[k]))
                    .collect()
            })
            .collect();
        Ok(Self {
            num_vars: n,
            num_cons: m,
            var_x: Tensor::from_vec(n, INPUT_DIM, flat(&graph.var_features)),
            cons_x: Tensor::from_vec(m, INPUT_DIM, flat(&graph.cons_features)),
            edge_ab: Tensor::from_vec(e, 2, edge_ab),
            edge_var: graph.edge_var.clone().into(),
            edge_cons: graph.edge_cons.clone().into(),
            var_edges: graph.var_edges.clone().into(),
            cons_edges: graph.cons_edges.clone().into(),
            residual: Rc::new(SparseRows {
                rows,
                offset: graph.rhs.clone(),
                num_cols: n,
            }),
        })
    }
}

/// `softmax(A·x̄ − b)` with the raw constraint data of `graph`.
pub fn residual_error(xbar: &[f64], graph: &BipartiteGraph) -> Vec<f64> {
    let r: Vec<f64> = graph
        .cons_edges
        .iter()
        .zip(&graph.rhs)
        .map(|(es, b)| {
            es.iter()
                .map(|&k| graph.edge_coef[k] * xbar[graph.edge_var[k]])
                .sum::<f64>()
                - b
        })
        .collect();
    softmax(&r)
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `v^(0) … v^(R)`.
    pub vars: Vec<Tensor>,
    /// `c^(0) … c^(R)`.
    pub cons: Vec<Tensor>,
    /// Per round soft assignment `x̄` (error variants only).
    pub assignments: Vec<Vec<f64>>,
    /// Per round residual distribution `e` (error variants only).
    pub residuals: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

struct ForwardVars {
    params: Vec<Var>,
    vars: Vec<Var>,
    cons: Vec<Var>,
    assignments: Vec<Var>,
    residuals: Vec<Var>,
    logits: Var,
}

#[derive(Debug, Clone)]
pub struct GnnModel {
    arch: Architecture,
    hidden_dim: usize,
    num_rounds: usize,
    tau: f64,
    names: Vec<String>,
    params: Vec<Tensor>,
    layout: Layout,
}

impl PartialEq for GnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self.hidden_dim == other.hidden_dim
            && self.num_rounds == other.num_rounds
            && self.tau.to_bits() == other.tau.to_bits()
            && self.names == other.names
            && self.params.len() == other.params.len()
            && self.params.iter().zip(&other.params).all(|(a, b)| {
                a.shape() == b.shape()
                    && a.data()
                        .iter()
                        .zip(b.data())
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

impl GnnModel {
    /// Default-sized model (hidden 64, four rounds) with Xavier-uniform
    /// weights and zero biases.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        Self::with_dims(arch, HIDDEN_DIM, NUM_ROUNDS, seed)
    }

    pub fn with_dims(arch: Architecture, hidden_dim: usize, num_rounds: usize, seed: u64) -> Self {
        let (layout, specs) = build_layout(arch, hidden_dim, num_rounds);
        let mut rng = rng_for(seed, 0);
        let params = specs
            .iter()
            .map(|(name, r, c)| {
                if name.ends_with(".b") {
                    Tensor::zeros(*r, *c)
                } else {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    let data = (0..r * c).map(|_| rng.random_range(-a..a)).collect();
                    Tensor::from_vec(*r, *c, data)
                }
            })
            .collect();
        Self {
            arch,
            hidden_dim,
            num_rounds,
            tau: 0.0,
            names: specs.into_iter().map(|s| s.0).collect(),
            params,
            layout,
        }
    }

    /// Rebuilds a model from stored tensors, checking names, shapes and
    /// finiteness against the layout implied by the header fields.
    pub fn from_parts(
        arch: Architecture,
        hidden_dim: usize,
        num_rounds: usize,
        tau: f64,
        tensors: Vec<(String, Tensor)>,
    ) -> Result<Self> {
        if hidden_dim == 0 || num_rounds == 0 {
            return Err(Error::ModelShape(
                "hidden dimension and rounds must be positive".into(),
            ));
        }
        let (layout, specs) = build_layout(arch, hidden_dim, num_rounds);
        if tensors.len() != specs.len() {
            return Err(Error::ModelShape(format!(
                "expected {} tensors for {arch}, found {}",
                specs.len(),
                tensors.len()
            )));
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for ((name, r, c), (got_name, t)) in specs.into_iter().zip(tensors) {
            if name != got_name || t.shape() != (r, c) {
                return Err(Error::ModelShape(format!(
                    "expected `{name}` of shape {r}x{c}, found `{got_name}` of shape {}x{}",
                    t.rows(),
                    t.cols()
                )));
            }
            if !t.is_finite() {
                return Err(Error::CorruptModel(format!(
                    "tensor `{name}` has non-finite entries"
                )));
            }
            names.push(name);
            params.push(t);
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::CorruptModel(format!("invalid threshold {tau}")));
        }
        Ok(Self {
            arch,
            hidden_dim,
            num_rounds,
            tau,
            names,
            params,
            layout,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn num_rounds(&self) -> usize {
        self.num_rounds
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) {
        self.tau = tau;
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|t| t.data().len()).sum()
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &mut self.params[i])
    }

    pub fn named_params(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    /// The matching plain model: error-message weights and the assignment
    /// heads are dropped, everything else is copied.
    pub fn without_error(&self) -> Self {
        if !self.arch.uses_error() {
            return self.clone();
        }
        let plain = self.arch.plain();
        let (layout, specs) = build_layout(plain, self.hidden_dim, self.num_rounds);
        let params = specs
            .iter()
            .map(|(name, r, c)| {
                let t = self
                    .param(name)
                    .expect("plain parameter exists in error model");
                Tensor::from_vec(*r, *c, t.data()[..r * c].to_vec())
            })
            .collect();
        Self {
            arch: plain,
            hidden_dim: self.hidden_dim,
            num_rounds: self.num_rounds,
            tau: self.tau,
            names: specs.into_iter().map(|s| s.0).collect(),
            params,
            layout,
        }
    }

    /// Sets to zero every weight that multiplies an error input `e_j`.
    pub fn zero_error_weights(&mut self) {
        if !self.arch.uses_error() {
            return;
        }
        for t in 0..self.num_rounds {
            let name = if self.arch.is_sage() {
                format!("r{t}.c2v.edge1.w")
            } else {
                format!("r{t}.c2v.h1.w")
            };
            let w = self.param_mut(&name).expect("c2v input weights");
            let (r, c) = w.shape();
            w.data_mut()[(r - 1) * c..]
                .iter_mut()
                .for_each(|x| *x = 0.0);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn side_pass(
        &self,
        tape: &mut Tape<'_>,
        p: &[Var],
        side: Side,
        dst: Var,
        src: Var,
        edge_in: Var,
        dst_index: &Rc<[usize]>,
        src_index: &Rc<[usize]>,
        segments: &Rc<[Vec<usize>]>,
    ) -> Var {
        match side {
            Side::Sage {
                msg,
                edge1,
                edge2,
                self_w,
                agg_w,
                bias,
            } => {
                let src_w = tape.matmul(src, p[msg]);
                let per_edge = tape.gather(src_w, src_index.clone());
                let h = tape.linear(edge_in, p[edge1.w], p[edge1.b]);
                let h = tape.relu(h);
                let lifted = tape.linear(h, p[edge2.w], p[edge2.b]);
                let m = tape.add(per_edge, lifted);
                let m = tape.relu(m);
                let agg = tape.segment_mean(m, segments.clone());
                let s = tape.matmul(dst, p[self_w]);
                let a = tape.matmul(agg, p[agg_w]);
                let merged = tape.add(s, a);
                let merged = tape.add_row(merged, p[bias]);
                tape.relu(merged)
            }
            Side::Ec { h1, h2 } => {
                let d = tape.gather(dst, dst_index.clone());
                let s = tape.gather(src, src_index.clone());
                let z = tape.concat(&[d, s, edge_in]);
                let h = tape.linear(z, p[h1.w], p[h1.b]);
                let h = tape.relu(h);
                let out = tape.linear(h, p[h2.w], p[h2.b]);
                tape.segment_mean(out, segments.clone())
            }
        }
    }

    fn record<'a>(&'a self, tape: &mut Tape<'a>, g: &GraphInputs) -> ForwardVars {
        let p: Vec<Var> = self.params.iter().map(|t| tape.param(t)).collect();
        let mut v = tape.constant(g.var_x.clone());
        let mut c = tape.constant(g.cons_x.clone());
        let ab = tape.constant(g.edge_ab.clone());
        let mut out = ForwardVars {
            params: Vec::new(),
            vars: vec![v],
            cons: vec![c],
            assignments: Vec::new(),
            residuals: Vec::new(),
            logits: v,
        };
        for round in &self.layout.rounds {
            let c_next = self.side_pass(
                tape,
                &p,
                round.v2c,
                c,
                v,
                ab,
                &g.edge_cons,
                &g.edge_var,
                &g.cons_edges,
            );
            let edge_in = match round.asg {
                Some(asg) => {
                    let z = tape.linear(v, p[asg.w], p[asg.b]);
                    let xbar = tape.sigmoid(z);
                    let r = tape.sparse_affine(xbar, g.residual.clone());
                    let e = tape.softmax(r);
                    out.assignments.push(xbar);
                    out.residuals.push(e);
                    let per_edge = tape.gather(e, g.edge_cons.clone());
                    tape.concat(&[ab, per_edge])
                }
                None => ab,
            };
            let v_next = self.side_pass(
                tape,
                &p,
                round.c2v,
                v,
                c_next,
                edge_in,
                &g.edge_var,
                &g.edge_cons,
                &g.var_edges,
            );
            v = v_next;
            c = c_next;
            out.vars.push(v);
            out.cons.push(c);
        }
        let mut h = tape.concat(&out.vars);
        for (l, lin) in self.layout.out.iter().enumerate() {
            h = tape.linear(h, p[lin.w], p[lin.b]);
            if l + 1 < self.layout.out.len() {
                h = tape.relu(h);
            }
        }
        out.logits = h;
        out.params = p;
        out
    }

    /// One logit per variable.
    pub fn logits(&self, inputs: &GraphInputs) -> Vec<f64> {
        let mut tape = Tape::new();
        let fw = self.record(&mut tape, inputs);
        tape.value(fw.logits).data().to_vec()
    }

    /// Predicted biases `p̂ = σ(logits)`.
    pub fn forward(&self, graph: &BipartiteGraph) -> Result<Vec<f64>> {
        let inputs = GraphInputs::new(graph)?;
        Ok(self.logits(&inputs).into_iter().map(sigmoid).collect())
    }

    /// Every intermediate embedding of a forward pass.
    pub fn trace(&self, graph: &BipartiteGraph) -> Result<ForwardTrace> {
        let inputs = GraphInputs::new(graph)?;
        let mut tape = Tape::new();
        let fw = self.record(&mut tape, &inputs);
        let col = |v: &Var| tape.value(*v).data().to_vec();
        Ok(ForwardTrace {
            vars: fw.vars.iter().map(|v| tape.value(*v).clone()).collect(),
            cons: fw.cons.iter().map(|v| tape.value(*v).clone()).collect(),
            assignments: fw.assignments.iter().map(col).collect(),
            residuals: fw.residuals.iter().map(col).collect(),
            logits: col(&fw.logits),
        })
    }

    fn check_round(
        &self,
        round: usize,
        var: &Tensor,
        cons: &Tensor,
        g: &GraphInputs,
    ) -> Result<()> {
        if round >= self.num_rounds {
            return Err(Error::ModelShape(format!("round {round} out of range")));
        }
        let d = if round == 0 {
            INPUT_DIM
        } else {
            self.hidden_dim
        };
        if var.shape() != (g.num_vars, d) || cons.shape() != (g.num_cons, d) {
            return Err(Error::ModelShape(format!(
                "round {round} expects {}x{d} and {}x{d} embeddings",
                g.num_vars, g.num_cons
            )));
        }
        Ok(())
    }

    /// Constraint update of round `round` applied to the given embeddings.
    pub fn v2c_pass(
        &self,
        round: usize,
        var: &Tensor,
        cons: &Tensor,
        graph: &BipartiteGraph,
    ) -> Result<Tensor> {
        let g = GraphInputs::new(graph)?;
        self.check_round(round, var, cons, &g)?;
        let mut tape = Tape::new();
        let p: Vec<Var> = self.params.iter().map(|t| tape.param(t)).collect();
        let v = tape.constant(var.clone());
        let c = tape.constant(cons.clone());
        let ab = tape.constant(g.edge_ab.clone());
        let out = self.side_pass(
            &mut tape,
            &p,
            self.layout.rounds[round].v2c,
            c,
            v,
            ab,
            &g.edge_cons,
            &g.edge_var,
            &g.cons_edges,
        );
        Ok(tape.value(out).clone())
    }

    /// Soft assignment `x̄ = σ(v·w + b)` of round `round`.
    pub fn assignment(&self, round: usize, var: &Tensor) -> Result<Vec<f64>> {
        let asg = self
            .layout
            .rounds
            .get(round)
            .and_then(|r| r.asg)
            .ok_or_else(|| Error::ModelShape(format!("no assignment head for round {round}")))?;
        let w = &self.params[asg.w];
        if var.cols() != w.rows() {
            return Err(Error::ModelShape("assignment input width".into()));
        }
        let z = var.matmul(w);
        let b = self.params[asg.b].data()[0];
        Ok(z.data().iter().map(|v| sigmoid(v + b)).collect())
    }

    /// Variable update of round `round`. `cons` is the already-updated
    /// constraint embedding; `e` is required exactly for error variants.
    pub fn c2v_pass(
        &self,
        round: usize,
        var: &Tensor,
        cons: &Tensor,
        e: Option<&[f64]>,
        graph: &BipartiteGraph,
    ) -> Result<Tensor> {
        let g = GraphInputs::new(graph)?;
        let d = if round == 0 {
            INPUT_DIM
        } else {
            self.hidden_dim
        };
        if round >= self.num_rounds
            || var.shape() != (g.num_vars, d)
            || cons.shape() != (g.num_cons, self.hidden_dim)
        {
            return Err(Error::ModelShape(format!(
                "c2v round {round} embedding shapes"
            )));
        }
        let mut tape = Tape::new();
        let p: Vec<Var> = self.params.iter().map(|t| tape.param(t)).collect();
        let v = tape.constant(var.clone());
        let c = tape.constant(cons.clone());
        let ab = tape.constant(g.edge_ab.clone());
        let edge_in = match (self.arch.uses_error(), e) {
            (true, Some(e)) if e.len() == g.num_cons => {
                let ev = tape.constant(Tensor::column(e));
                let per_edge = tape.gather(ev, g.edge_cons.clone());
                tape.concat(&[ab, per_edge])
            }
            (false, None) => ab,
            _ => {
                return Err(Error::ModelShape(
                    "error signal does not match architecture".into(),
                ))
            }
        };
        let out = self.side_pass(
            &mut tape,
            &p,
            self.layout.rounds[round].c2v,
            v,
            c,
            edge_in,
            &g.edge_var,
            &g.edge_cons,
            &g.var_edges,
        );
        Ok(tape.value(out).clone())
    }

    /// Weighted BCE loss and its gradient with respect to every parameter,
    /// in storage order.
    pub fn loss_and_gradient(
        &self,
        inputs: &GraphInputs,
        targets: &Rc<[f64]>,
        weights: &Rc<[f64]>,
    ) -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let fw = self.record(&mut tape, inputs);
        let loss = tape.bce_with_logits(fw.logits, targets.clone(), weights.clone());
        let value = tape.value(loss).data()[0];
        let mut grads = tape.backward(loss);
        let out = fw
            .params
            .iter()
            .zip(&self.params)
            .map(|(v, t)| {
                grads[v.index()]
                    .take()
                    .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))
            })
            .collect();
        (value, out)
    }

    /// Weighted BCE loss only.
    pub fn loss(&self, inputs: &GraphInputs, targets: &Rc<[f64]>, weights: &Rc<[f64]>) -> f64 {
        let mut tape = Tape::new();
        let fw = self.record(&mut tape, inputs);
        let loss = tape.bce_with_logits(fw.logits, targets.clone(), weights.clone());
        tape.value(loss).data()[0]
    }
}
