//! Scalar straight-line re-implementation of the bias network, reading the
//! weights by name. It shares no code with the tape engine and accumulates
//! every sum in the same order, so its logits must match bit for bit.

use mipgnn::gnn::{Architecture, GnnModel, GraphInputs};
use mipgnn::model::BipartiteGraph;
use std::rc::Rc;

type Mat = Vec<Vec<f64>>;

pub struct Oracle<'a> {
    model: &'a GnnModel,
    /// Sign of every ReLU input, in evaluation order.
    pub relu_mask: Vec<bool>,
}

fn weight(model: &GnnModel, name: &str) -> Mat {
    let t = model
        .param(name)
        .unwrap_or_else(|| panic!("missing {name}"));
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn bias(model: &GnnModel, name: &str) -> Vec<f64> {
    weight(model, name).remove(0)
}

fn dot_rows(x: &Mat, w: &Mat) -> Mat {
    let cols = w.first().map_or(0, Vec::len);
    x.iter()
        .map(|xi| {
            let mut out = vec![0.0; cols];
            for (k, &a) in xi.iter().enumerate() {
                for j in 0..cols {
                    out[j] += a * w[k][j];
                }
            }
            out
        })
        .collect()
}

fn plus_bias(mut x: Mat, b: &[f64]) -> Mat {
    for row in &mut x {
        for (v, bj) in row.iter_mut().zip(b) {
            *v += bj;
        }
    }
    x
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Oracle<'a> {
    pub fn new(model: &'a GnnModel) -> Self {
        Self {
            model,
            relu_mask: Vec::new(),
        }
    }

    fn relu(&mut self, mut x: Mat) -> Mat {
        for row in &mut x {
            for v in row.iter_mut() {
                self.relu_mask.push(*v > 0.0);
                *v = v.max(0.0);
            }
        }
        x
    }

    fn lin(&self, x: &Mat, prefix: &str) -> Mat {
        plus_bias(
            dot_rows(x, &weight(self.model, &format!("{prefix}.w"))),
            &bias(self.model, &format!("{prefix}.b")),
        )
    }

    /// One message-passing side. `edges` lists `(dst, src)` per edge and
    /// `segments[d]` the edges entering `d`.
    #[allow(clippy::too_many_arguments)]
    fn side(
        &mut self,
        prefix: &str,
        sage: bool,
        dst: &Mat,
        src: &Mat,
        edge_in: &Mat,
        edges: &[(usize, usize)],
        segments: &[Vec<usize>],
    ) -> Mat {
        let h = weight(
            self.model,
            &format!("{prefix}.{}", if sage { "msg.w" } else { "h2.w" }),
        )[0]
        .len();
        let per_edge: Mat = if sage {
            let src_w = dot_rows(src, &weight(self.model, &format!("{prefix}.msg.w")));
            let hidden = self.lin(edge_in, &format!("{prefix}.edge1"));
            let hidden = self.relu(hidden);
            let lifted = self.lin(&hidden, &format!("{prefix}.edge2"));
            let mut m: Mat = edges.iter().map(|&(_, s)| src_w[s].clone()).collect();
            for (row, l) in m.iter_mut().zip(&lifted) {
                for (a, b) in row.iter_mut().zip(l) {
                    *a += b;
                }
            }
            self.relu(m)
        } else {
            let z: Mat = edges
                .iter()
                .zip(edge_in)
                .map(|(&(d, s), e)| dst[d].iter().chain(&src[s]).chain(e).copied().collect())
                .collect();
            let hidden = self.lin(&z, &format!("{prefix}.h1"));
            let hidden = self.relu(hidden);
            self.lin(&hidden, &format!("{prefix}.h2"))
        };
        let mut agg: Mat = vec![vec![0.0; h]; dst.len()];
        for (d, members) in segments.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            for &k in members {
                for (a, b) in agg[d].iter_mut().zip(&per_edge[k]) {
                    *a += b;
                }
            }
            let count = members.len() as f64;
            for a in agg[d].iter_mut() {
                *a /= count;
            }
        }
        if !sage {
            return agg;
        }
        let s = dot_rows(dst, &weight(self.model, &format!("{prefix}.self.w")));
        let a = dot_rows(&agg, &weight(self.model, &format!("{prefix}.agg.w")));
        let mut merged = s;
        for (row, other) in merged.iter_mut().zip(&a) {
            for (x, y) in row.iter_mut().zip(other) {
                *x += y;
            }
        }
        let merged = plus_bias(merged, &bias(self.model, &format!("{prefix}.merge.b")));
        self.relu(merged)
    }

    pub fn logits(&mut self, g: &BipartiteGraph) -> Vec<f64> {
        self.relu_mask.clear();
        let arch = self.model.architecture();
        let sage = matches!(arch, Architecture::SageErr | Architecture::SagePlain);
        let with_error = matches!(arch, Architecture::SageErr | Architecture::EcErr);
        let e_count = g.edge_var.len();
        let v2c_edges: Vec<(usize, usize)> = (0..e_count)
            .map(|k| (g.edge_cons[k], g.edge_var[k]))
            .collect();
        let c2v_edges: Vec<(usize, usize)> = (0..e_count)
            .map(|k| (g.edge_var[k], g.edge_cons[k]))
            .collect();
        let ab: Mat = (0..e_count)
            .map(|k| vec![g.edge_features[k], g.cons_features[g.edge_cons[k]][0]])
            .collect();
        let mut v: Mat = g.var_features.iter().map(|f| f.to_vec()).collect();
        let mut c: Mat = g.cons_features.iter().map(|f| f.to_vec()).collect();
        let mut history = vec![v.clone()];
        for t in 0..self.model.num_rounds() {
            let c_next = self.side(
                &format!("r{t}.v2c"),
                sage,
                &c,
                &v,
                &ab,
                &v2c_edges,
                &g.cons_edges,
            );
            let edge_in: Mat = if with_error {
                let z = self.lin(&v, &format!("r{t}.asg"));
                let xbar: Vec<f64> = z.iter().map(|r| stable_sigmoid(r[0])).collect();
                let resid: Vec<f64> = g
                    .cons_edges
                    .iter()
                    .zip(&g.rhs)
                    .map(|(es, b)| {
                        es.iter()
                            .map(|&k| g.edge_coef[k] * xbar[g.edge_var[k]])
                            .sum::<f64>()
                            - b
                    })
                    .collect();
                let max = resid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let ex: Vec<f64> = resid.iter().map(|r| (r - max).exp()).collect();
                let total: f64 = ex.iter().sum();
                let e: Vec<f64> = ex.iter().map(|x| x / total).collect();
                (0..e_count)
                    .map(|k| vec![ab[k][0], ab[k][1], e[g.edge_cons[k]]])
                    .collect()
            } else {
                ab.clone()
            };
            let v_next = self.side(
                &format!("r{t}.c2v"),
                sage,
                &v,
                &c_next,
                &edge_in,
                &c2v_edges,
                &g.var_edges,
            );
            v = v_next;
            c = c_next;
            history.push(v.clone());
        }
        let mut h: Mat = (0..g.num_vars)
            .map(|i| {
                history
                    .iter()
                    .flat_map(|layer| layer[i].iter().copied())
                    .collect()
            })
            .collect();
        let layers = mipgnn::gnn::OUTPUT_LAYERS;
        for l in 0..layers {
            h = self.lin(&h, &format!("out{l}"));
            if l + 1 < layers {
                h = self.relu(h);
            }
        }
        h.into_iter().map(|r| r[0]).collect()
    }
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub skipped_small: usize,
    pub skipped_kink: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
    /// Checked entries whose relative error exceeds 1e-4.
    pub over_tolerance: usize,
    /// Largest `|analytic − numeric|` among those, in units of `ε·|L| / 2h`,
    /// the spacing of representable central differences.
    pub max_over_ulps: f64,
}

/// Compares every analytic weight gradient with `(L(w+h) − L(w−h)) / 2h`.
/// Entries with both magnitudes below `floor` are skipped, as are entries
/// whose perturbations land on different sides of a ReLU kink.
pub fn finite_difference_check(
    model: &GnnModel,
    g: &BipartiteGraph,
    labels: &[f64],
    h: f64,
    floor: f64,
) -> FdReport {
    let inputs = GraphInputs::new(g).unwrap();
    let targets: Rc<[f64]> = labels.into();
    let weights: Rc<[f64]> = vec![1.0; labels.len()].into();
    let (loss, grads) = model.loss_and_gradient(&inputs, &targets, &weights);
    let spacing = f64::EPSILON * loss.abs() / (2.0 * h);
    let mut work = model.clone();
    let mut report = FdReport::default();
    for (pi, grad) in grads.iter().enumerate() {
        for k in 0..grad.data().len() {
            let orig = work.params()[pi].data()[k];
            work.params_mut()[pi].data_mut()[k] = orig + h;
            let up = work.loss(&inputs, &targets, &weights);
            work.params_mut()[pi].data_mut()[k] = orig - h;
            let down = work.loss(&inputs, &targets, &weights);
            let fd = (up - down) / (2.0 * h);
            let an = grad.data()[k];
            if an.abs() < floor && fd.abs() < floor {
                report.skipped_small += 1;
                work.params_mut()[pi].data_mut()[k] = orig;
                continue;
            }
            let rel = (an - fd).abs() / an.abs().max(fd.abs());
            if rel > 1e-4 {
                let mut o = Oracle::new(&work);
                o.logits(g);
                let mask_down = std::mem::take(&mut o.relu_mask);
                work.params_mut()[pi].data_mut()[k] = orig + h;
                let mut o = Oracle::new(&work);
                o.logits(g);
                if o.relu_mask != mask_down {
                    report.skipped_kink += 1;
                    work.params_mut()[pi].data_mut()[k] = orig;
                    continue;
                }
            }
            work.params_mut()[pi].data_mut()[k] = orig;
            report.checked += 1;
            if rel > 1e-4 {
                report.over_tolerance += 1;
                report.max_over_ulps = report.max_over_ulps.max((an - fd).abs() / spacing);
            }
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((model.param_names()[pi].clone(), k, an, fd));
            }
        }
    }
    report
}
