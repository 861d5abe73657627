//! Dense tensors and a reverse-mode tape.
//!
//! Every operation evaluates eagerly and records itself on the tape; a
//! single backward sweep in reverse creation order then yields gradients for
//! every node that depends on a parameter. Values are borrowed where
//! possible so model weights are never copied onto the tape.

use std::borrow::Cow;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_vec(r, c, data)
    }

    pub fn column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self · other`. Each entry is accumulated from zero in increasing
    /// inner-index order.
    pub fn matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let o = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                let b = &other.data[p * m..(p + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += a * bj;
                }
            }
        }
        Tensor::from_vec(n, m, out)
    }

    /// `selfᵀ · other`.
    fn t_matmul(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.rows, other.rows);
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; k * m];
        for i in 0..n {
            let b = &other.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let o = &mut out[p * m..(p + 1) * m];
                for (oj, bj) in o.iter_mut().zip(b) {
                    *oj += a * bj;
                }
            }
        }
        Tensor::from_vec(k, m, out)
    }

    /// `self · otherᵀ`.
    fn matmul_t(&self, other: &Tensor) -> Tensor {
        assert_eq!(self.cols, other.cols);
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * m + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Tensor::from_vec(n, m, out)
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Sparse linear map `out_j = Σ a·x[i] − offset_j` over `(i, a)` rows.
#[derive(Debug, Clone)]
pub struct SparseRows {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub offset: Vec<f64>,
    pub num_cols: usize,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Gather(Var, Rc<[usize]>),
    SegmentMean(Var, Rc<[Vec<usize>]>),
    Sparse(Var, Rc<SparseRows>),
    Softmax(Var),
    Bce {
        logits: Var,
        targets: Rc<[f64]>,
        weights: Rc<[f64]>,
    },
    SquaredError(Var, Rc<[f64]>),
}

/// Records operations for one forward pass.
pub struct Tape<'a> {
    values: Vec<Cow<'a, Tensor>>,
    ops: Vec<Op>,
    needs_grad: Vec<bool>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / total).collect()
}

fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
            needs_grad: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.values.push(Cow::Owned(value));
        self.ops.push(op);
        self.needs_grad.push(needs_grad);
        Var(self.values.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.needs_grad[v.0]
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Borrowed weight; gradients flow back to it.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.values.push(Cow::Borrowed(t));
        self.ops.push(Op::Leaf);
        self.needs_grad.push(true);
        Var(self.values.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        assert_eq!(v.shape(), self.value(b).shape(), "add shape mismatch");
        v.add_assign(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(v, Op::Add(a, b), ng)
    }

    /// Adds the `1 × c` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!((1, self.value(a).cols()), b.shape(), "bias shape mismatch");
        let mut v = self.value(a).clone();
        let c = v.cols();
        for row in v.data_mut().chunks_mut(c.max(1)) {
            for (x, y) in row.iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        let ng = self.ng(a) || self.ng(bias);
        self.push(v, Op::AddRow(a, bias), ng)
    }

    /// `x · w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for x in v.data_mut() {
            *x = x.max(0.0);
        }
        let ng = self.ng(a);
        self.push(v, Op::Relu(a), ng)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for x in v.data_mut() {
            *x = sigmoid(*x);
        }
        let ng = self.ng(a);
        self.push(v, Op::Sigmoid(a), ng)
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let t = self.value(p);
                assert_eq!(t.rows(), rows, "concat row mismatch");
                data.extend_from_slice(t.row(r));
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::Concat(parts.to_vec()),
            ng,
        )
    }

    /// Row `k` of the result is row `index[k]` of `a`.
    pub fn gather(&mut self, a: Var, index: Rc<[usize]>) -> Var {
        let t = self.value(a);
        let c = t.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            data.extend_from_slice(t.row(i));
        }
        let ng = self.ng(a);
        self.push(
            Tensor::from_vec(index.len(), c, data),
            Op::Gather(a, index),
            ng,
        )
    }

    /// Row `s` of the result is the mean of the rows of `a` listed in
    /// `segments[s]`, summed in list order; an empty segment gives zeros.
    pub fn segment_mean(&mut self, a: Var, segments: Rc<[Vec<usize>]>) -> Var {
        let t = self.value(a);
        let c = t.cols();
        let mut out = Tensor::zeros(segments.len(), c);
        for (s, members) in segments.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let o = &mut out.data_mut()[s * c..(s + 1) * c];
            for &e in members {
                for (x, y) in o.iter_mut().zip(t.row(e)) {
                    *x += y;
                }
            }
            let inv = members.len() as f64;
            for x in o.iter_mut() {
                *x /= inv;
            }
        }
        let ng = self.ng(a);
        self.push(out, Op::SegmentMean(a, segments), ng)
    }

    /// Applies a fixed sparse affine map to the column vector `x`.
    pub fn sparse_affine(&mut self, x: Var, map: Rc<SparseRows>) -> Var {
        let t = self.value(x);
        assert_eq!(t.shape(), (map.num_cols, 1), "sparse map shape mismatch");
        let out: Vec<f64> = map
            .rows
            .iter()
            .zip(&map.offset)
            .map(|(row, off)| row.iter().map(|&(i, a)| a * t.data()[i]).sum::<f64>() - off)
            .collect();
        let ng = self.ng(x);
        self.push(Tensor::column(&out), Op::Sparse(x, map), ng)
    }

    /// Softmax over the entries of a column vector.
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        assert_eq!(t.cols(), 1, "softmax expects a column");
        let v = Tensor::column(&softmax(t.data()));
        let ng = self.ng(a);
        self.push(v, Op::Softmax(a), ng)
    }

    /// Weighted mean binary cross-entropy of a logit column:
    /// `(1/n) Σ w_i · bce(z_i, y_i)`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Rc<[f64]>, weights: Rc<[f64]>) -> Var {
        let z = self.value(logits).data();
        assert_eq!(z.len(), targets.len());
        assert_eq!(z.len(), weights.len());
        let n = z.len().max(1) as f64;
        let total: f64 = z
            .iter()
            .zip(targets.iter())
            .zip(weights.iter())
            .map(|((&z, &y), &w)| w * bce_with_logits(z, y))
            .sum();
        let ng = self.ng(logits);
        self.push(
            Tensor::from_vec(1, 1, vec![total / n]),
            Op::Bce {
                logits,
                targets,
                weights,
            },
            ng,
        )
    }

    /// `Σ (a − y)²` over all entries.
    pub fn squared_error(&mut self, a: Var, targets: Rc<[f64]>) -> Var {
        let total = self
            .value(a)
            .data()
            .iter()
            .zip(targets.iter())
            .map(|(p, y)| (p - y) * (p - y))
            .sum();
        let ng = self.ng(a);
        self.push(
            Tensor::from_vec(1, 1, vec![total]),
            Op::SquaredError(a, targets),
            ng,
        )
    }

    /// Gradients of the scalar `loss` with respect to every node. Nodes the
    /// loss does not depend on (or that hold constants) get `None`.
    pub fn backward(&self, loss: Var) -> Vec<Option<Tensor>> {
        assert_eq!(self.value(loss).shape(), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Tensor>> = (0..self.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::from_vec(1, 1, vec![1.0]));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if !self.needs_grad[id] {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (id, g) in grads.iter_mut().enumerate() {
            if !self.needs_grad[id] {
                *g = None;
            }
        }
        grads
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.needs_grad[v.0] {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &self.ops[id] {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    let ga = g.matmul_t(self.value(*b));
                    self.accumulate(grads, *a, ga);
                }
                if self.ng(*b) {
                    let gb = self.value(*a).t_matmul(g);
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::AddRow(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                if self.ng(*bias) {
                    let c = g.cols();
                    let mut gb = Tensor::zeros(1, c);
                    for r in 0..g.rows() {
                        for (x, y) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    self.accumulate(grads, *bias, gb);
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Sigmoid(a) => {
                let y = &self.values[id];
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gv, s)| gv * s * (1.0 - s))
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(g.rows(), g.cols(), data));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    if self.ng(p) {
                        let mut data = Vec::with_capacity(g.rows() * c);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row(r)[offset..offset + c]);
                        }
                        self.accumulate(grads, p, Tensor::from_vec(g.rows(), c, data));
                    }
                    offset += c;
                }
            }
            Op::Gather(a, index) => {
                let src = self.value(*a);
                let c = src.cols();
                let mut ga = Tensor::zeros(src.rows(), c);
                for (k, &i) in index.iter().enumerate() {
                    let o = &mut ga.data_mut()[i * c..(i + 1) * c];
                    for (x, y) in o.iter_mut().zip(g.row(k)) {
                        *x += y;
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::SegmentMean(a, segments) => {
                let src = self.value(*a);
                let c = src.cols();
                let mut ga = Tensor::zeros(src.rows(), c);
                for (s, members) in segments.iter().enumerate() {
                    let inv = members.len() as f64;
                    for &e in members {
                        let o = &mut ga.data_mut()[e * c..(e + 1) * c];
                        for (x, y) in o.iter_mut().zip(g.row(s)) {
                            *x += y / inv;
                        }
                    }
                }
                self.accumulate(grads, *a, ga);
            }
            Op::Sparse(x, map) => {
                let mut gx = vec![0.0; map.num_cols];
                for (row, gj) in map.rows.iter().zip(g.data()) {
                    for &(i, a) in row {
                        gx[i] += a * gj;
                    }
                }
                self.accumulate(grads, *x, Tensor::column(&gx));
            }
            Op::Softmax(a) => {
                let s = self.values[id].data();
                let dot: f64 = s.iter().zip(g.data()).map(|(p, q)| p * q).sum();
                let data: Vec<f64> = s.iter().zip(g.data()).map(|(p, q)| p * (q - dot)).collect();
                self.accumulate(grads, *a, Tensor::column(&data));
            }
            Op::Bce {
                logits,
                targets,
                weights,
            } => {
                let z = self.value(*logits).data();
                let scale = g.data()[0] / z.len().max(1) as f64;
                let data: Vec<f64> = z
                    .iter()
                    .zip(targets.iter())
                    .zip(weights.iter())
                    .map(|((&z, &y), &w)| scale * w * (sigmoid(z) - y))
                    .collect();
                self.accumulate(grads, *logits, Tensor::column(&data));
            }
            Op::SquaredError(a, targets) => {
                let t = self.value(*a);
                let scale = g.data()[0];
                let data = t
                    .data()
                    .iter()
                    .zip(targets.iter())
                    .map(|(p, y)| 2.0 * scale * (p - y))
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(t.rows(), t.cols(), data));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Tensor::from_rows(&[vec![5.0], vec![6.0]]);
        assert_eq!(a.matmul(&b).data(), &[17.0, 39.0]);
        assert_eq!(a.t_matmul(&b).data(), &[23.0, 34.0]);
        assert_eq!(b.t_matmul(&b).data(), &[61.0]);
        let c = Tensor::from_rows(&[vec![1.0, 1.0]]);
        assert_eq!(a.matmul_t(&c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn unused_param_has_zero_gradient() {
        let w = Tensor::from_rows(&[vec![2.0]]);
        let unused = Tensor::from_rows(&[vec![5.0]]);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![3.0]]));
        let wv = tape.param(&w);
        let uv = tape.param(&unused);
        let y = tape.matmul(x, wv);
        let loss = tape.squared_error(y, Rc::from(vec![0.0]));
        let grads = tape.backward(loss);
        assert_eq!(grads[wv.index()].as_ref().unwrap().data(), &[36.0]);
        assert!(grads[uv.index()].is_none());
        assert!(grads[x.index()].is_none());
    }

    #[test]
    fn softmax_uniform_and_sum() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(softmax(&[3.0]), vec![1.0]);
        let s = softmax(&[1000.0, -1000.0, 0.0]);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_mean_empty_is_zero() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0]]));
        let m = tape.segment_mean(a, Rc::from(vec![vec![0, 1], vec![]]));
        assert_eq!(tape.value(m).data(), &[2.0, 4.0, 0.0, 0.0]);
    }
}
