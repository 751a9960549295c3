use std::hash::{DefaultHasher, Hasher};

use super::{matmul_acc, matmul_at_acc, matmul_bt_acc, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    ScalarMul(Var, f64),
    AddScalar(Var),
    ScaleBy(Var, Var),
    Relu(Var),
    MaxWithZero(Var),
    Softmax(Var),
    LayerNorm(Var, Var, Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Transpose(Var),
    Mean(Var),
    Sum(Var),
    AbsSum(Var),
    Lookup(Var, Vec<usize>),
    Gather(Var, Vec<usize>),
}

/// A single-use computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    values: Vec<Tensor>,
    grads: Vec<Option<Vec<f64>>>,
    ops: Vec<Op>,
    requires: Vec<bool>,
    no_grad: bool,
    fault: Option<&'static str>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape on which parameters are treated as constants.
    pub fn inference() -> Self {
        Self { no_grad: true, ..Self::default() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Test hook: doubles the gradient emitted by every op named `op`
    /// (e.g. `"scale_by"`), to confirm gradient checks catch broken rules.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, op: &'static str) {
        self.fault = Some(op);
    }

    fn push(&mut self, value: Tensor, op: Op, requires: bool) -> Var {
        self.values.push(value);
        self.grads.push(None);
        self.ops.push(op);
        self.requires.push(requires && !self.no_grad);
        Var(self.values.len() - 1)
    }

    fn req(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.requires[v.0])
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.values[v.0].shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.requires[v.0]
    }

    /// Constant input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Input leaf that receives a gradient.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id), true)
    }

    fn matrix_dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [m, n] => Ok((*m, *n)),
            s => Err(Error::shape(op, &[s])),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix_dims(a, "matmul")?;
        let (k2, n) = self.matrix_dims(b, "matmul")?;
        if k != k2 {
            return Err(Error::shape("matmul", &[self.shape(a), self.shape(b)]));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.values[a.0].data(), self.values[b.0].data(), &mut out, m, k, n);
        let t = Tensor::new(vec![m, n], out)?;
        let r = self.req(&[a, b]);
        Ok(self.push(t, Op::MatMul(a, b), r))
    }

    fn zip_same(&mut self, a: Var, b: Var, op: &'static str, f: fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, &[self.shape(a), self.shape(b)]));
        }
        let data = self.values[a.0]
            .data()
            .iter()
            .zip(self.values[b.0].data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a).to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        let r = self.req(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), r))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let r = self.req(&[a, b]);
        Ok(self.push(t, Op::Sub(a, b), r))
    }

    /// Adds a length-`n` vector to every row of `a` (`[.., n]`).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let n = self.values[a.0].last_dim();
        if self.values[row.0].numel() != n {
            return Err(Error::shape("add_row", &[self.shape(a), self.shape(row)]));
        }
        let bias = self.values[row.0].data().to_vec();
        let mut t = self.values[a.0].clone();
        for chunk in t.data_mut().chunks_mut(n.max(1)) {
            chunk.iter_mut().zip(&bias).for_each(|(x, b)| *x += b);
        }
        let r = self.req(&[a, row]);
        Ok(self.push(t, Op::AddRow(a, row), r))
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let src = &self.values[a.0];
        Tensor { shape: src.shape().to_vec(), data: src.data().iter().map(|&x| f(x)).collect() }
    }

    pub fn scalar_mul(&mut self, a: Var, c: f64) -> Var {
        let t = self.map(a, |x| c * x);
        let r = self.req(&[a]);
        self.push(t, Op::ScalarMul(a, c), r)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let t = self.map(a, |x| x + c);
        let r = self.req(&[a]);
        self.push(t, Op::AddScalar(a), r)
    }

    /// Multiplies `a` by the single value held in `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.values[s.0].numel() != 1 {
            return Err(Error::shape("scale_by", &[self.shape(a), self.shape(s)]));
        }
        let c = self.values[s.0].item();
        let t = self.map(a, |x| c * x);
        let r = self.req(&[a, s]);
        Ok(self.push(t, Op::ScaleBy(a, s), r))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x.max(0.0));
        let r = self.req(&[a]);
        self.push(t, Op::Relu(a), r)
    }

    /// Elementwise hinge `max(x, 0)`.
    pub fn max_with_zero(&mut self, a: Var) -> Var {
        let t = self.map(a, |x| x.max(0.0));
        let r = self.req(&[a]);
        self.push(t, Op::MaxWithZero(a), r)
    }

    pub fn softmax_lastdim(&mut self, a: Var) -> Var {
        let mut t = self.values[a.0].clone();
        let n = t.last_dim().max(1);
        for row in t.data_mut().chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            row.iter_mut().for_each(|x| *x /= sum);
        }
        let r = self.req(&[a]);
        self.push(t, Op::Softmax(a), r)
    }

    /// Normalizes every row of `a` to zero mean and unit variance, then
    /// applies the per-column `gain` and `bias`.
    pub fn layer_norm(&mut self, a: Var, gain: Var, bias: Var) -> Result<Var> {
        let n = self.values[a.0].last_dim();
        if self.values[gain.0].numel() != n || self.values[bias.0].numel() != n {
            return Err(Error::shape("layer_norm", &[self.shape(a), self.shape(gain), self.shape(bias)]));
        }
        let (gv, bv) = (self.values[gain.0].data(), self.values[bias.0].data());
        let mut t = self.values[a.0].clone();
        for row in t.data_mut().chunks_mut(n.max(1)) {
            let (mean, inv) = row_moments(row);
            for ((x, g), b) in row.iter_mut().zip(gv).zip(bv) {
                *x = (*x - mean) * inv * g + b;
            }
        }
        let r = self.req(&[a, gain, bias]);
        Ok(self.push(t, Op::LayerNorm(a, gain, bias), r))
    }

    pub fn concat_lastdim(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat_lastdim"))?;
        let outer = self.values[first.0].outer();
        let lead = &self.shape(first)[..self.shape(first).len().saturating_sub(1)];
        for p in parts {
            let s = self.shape(*p);
            if s.len() != lead.len() + 1 || &s[..lead.len()] != lead {
                let shapes: Vec<&[usize]> = parts.iter().map(|p| self.shape(*p)).collect();
                return Err(Error::shape("concat_lastdim", &shapes));
            }
        }
        let widths: Vec<usize> = parts.iter().map(|p| self.values[p.0].last_dim()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(outer * total);
        for i in 0..outer {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.values[p.0].data()[i * w..(i + 1) * w]);
            }
        }
        let mut shape = lead.to_vec();
        shape.push(total);
        let t = Tensor::new(shape, data)?;
        let r = self.req(parts);
        Ok(self.push(t, Op::Concat(parts.to_vec()), r))
    }

    /// Columns `start..end` of the last dimension.
    pub fn slice_lastdim(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let src = &self.values[a.0];
        let n = src.last_dim();
        if start > end || end > n {
            return Err(Error::Shape { op: "slice", shapes: format!("{:?}[..., {start}..{end}]", src.shape()) });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(src.outer() * w);
        for row in src.data().chunks(n.max(1)) {
            data.extend_from_slice(&row[start..end]);
        }
        let mut shape = src.shape().to_vec();
        *shape.last_mut().expect("slice of a scalar") = w;
        let t = Tensor::new(shape, data)?;
        let r = self.req(&[a]);
        Ok(self.push(t, Op::Slice(a, start, end), r))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims(a, "transpose")?;
        let src = self.values[a.0].data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        let t = Tensor::new(vec![n, m], data)?;
        let r = self.req(&[a]);
        Ok(self.push(t, Op::Transpose(a), r))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let src = &self.values[a.0];
        let v = if src.numel() == 0 { 0.0 } else { src.data().iter().sum::<f64>() / src.numel() as f64 };
        let r = self.req(&[a]);
        self.push(Tensor::scalar(v), Op::Mean(a), r)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.values[a.0].data().iter().sum();
        let r = self.req(&[a]);
        self.push(Tensor::scalar(v), Op::Sum(a), r)
    }

    /// L1 norm of all elements.
    pub fn abs_sum(&mut self, a: Var) -> Var {
        let v = self.values[a.0].data().iter().map(|x| x.abs()).sum();
        let r = self.req(&[a]);
        self.push(Tensor::scalar(v), Op::AbsSum(a), r)
    }

    /// Gathers rows of a `[V, d]` table.
    pub fn embedding_lookup(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let (v, d) = self.matrix_dims(table, "embedding_lookup")?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= v) {
            return Err(Error::Shape { op: "embedding_lookup", shapes: format!("index {bad} into [{v}, {d}]") });
        }
        let src = self.values[table.0].data();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let t = Tensor::new(vec![idx.len(), d], data)?;
        let r = self.req(&[table]);
        Ok(self.push(t, Op::Lookup(table, idx.to_vec()), r))
    }

    /// Gathers elements by flat row-major index into a vector.
    pub fn gather(&mut self, a: Var, flat: &[usize]) -> Result<Var> {
        let src = self.values[a.0].data();
        if let Some(&bad) = flat.iter().find(|&&i| i >= src.len()) {
            return Err(Error::Shape { op: "gather", shapes: format!("index {bad} into {:?}", self.shape(a)) });
        }
        let t = Tensor::vector(flat.iter().map(|&i| src[i]).collect());
        let r = self.req(&[a]);
        Ok(self.push(t, Op::Gather(a, flat.to_vec()), r))
    }

    /// Hash of the active side of every relu, hinge and absolute value on the
    /// tape. Two evaluations with equal signatures lie in the same smooth piece.
    pub fn kink_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for op in &self.ops {
            if let Op::Relu(a) | Op::MaxWithZero(a) | Op::AbsSum(a) = op {
                for &x in self.values[a.0].data() {
                    h.write_i8(if x > 0.0 { 1 } else if x < 0.0 { -1 } else { 0 });
                }
            }
        }
        h.finish()
    }

    /// Smallest distance of any kink-op input from its kink.
    pub fn min_kink_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for op in &self.ops {
            if let Op::Relu(a) | Op::MaxWithZero(a) | Op::AbsSum(a) = op {
                for &x in self.values[a.0].data() {
                    best = best.min(x.abs());
                }
            }
        }
        best
    }

    /// Reverse pass from a scalar loss.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.values[loss.0].numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape(loss).to_vec()));
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.requires[i] {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            if self.fault.is_some() && self.fault == Some(op_name(&self.ops[i])) {
                let doubled: Vec<f64> = g.iter().map(|x| 2.0 * x).collect();
                self.propagate(i, &doubled);
            } else {
                self.propagate(i, &g);
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let values = &self.values;
        let grads = &mut self.grads;
        let requires = &self.requires;
        macro_rules! acc {
            ($v:expr) => {
                grad_slot(grads, values, requires, $v)
            };
        }
        match &self.ops[i] {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = (values[a.0].shape()[0], values[a.0].shape()[1]);
                let n = values[b.0].shape()[1];
                if let Some(ga) = acc!(*a) {
                    matmul_bt_acc(g, values[b.0].data(), ga, m, k, n);
                }
                if let Some(gb) = acc!(*b) {
                    matmul_at_acc(values[a.0].data(), g, gb, m, k, n);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = acc!(v) {
                        gv.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if let Some(gb) = acc!(*b) {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y);
                }
            }
            Op::AddRow(a, row) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                let n = values[row.0].numel();
                if let Some(gr) = acc!(*row) {
                    for chunk in g.chunks(n.max(1)) {
                        gr.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::ScalarMul(a, c) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
                }
            }
            Op::AddScalar(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
            }
            Op::ScaleBy(a, s) => {
                let c = values[s.0].item();
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y);
                }
                let dot: f64 = values[a.0].data().iter().zip(g).map(|(x, y)| x * y).sum();
                if let Some(gs) = acc!(*s) {
                    gs[0] += dot;
                }
            }
            Op::Relu(a) | Op::MaxWithZero(a) => {
                let x = values[a.0].data();
                if let Some(ga) = acc!(*a) {
                    for ((d, &xv), &gv) in ga.iter_mut().zip(x).zip(g) {
                        if xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let y = values[i].data();
                let n = values[i].last_dim().max(1);
                if let Some(ga) = acc!(*a) {
                    for ((yr, gr), dr) in y.chunks(n).zip(g.chunks(n)).zip(ga.chunks_mut(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for ((d, &yv), &gv) in dr.iter_mut().zip(yr).zip(gr) {
                            *d += yv * (gv - dot);
                        }
                    }
                }
            }
            Op::LayerNorm(a, gain, bias) => {
                let n = values[a.0].last_dim().max(1);
                let gv = values[gain.0].data();
                let mut d_gain = vec![0.0; n];
                let mut d_bias = vec![0.0; n];
                let mut d_a = vec![0.0; values[a.0].numel()];
                for ((row, gr), dr) in values[a.0].data().chunks(n).zip(g.chunks(n)).zip(d_a.chunks_mut(n)) {
                    let (mean, inv) = row_moments(row);
                    let xhat: Vec<f64> = row.iter().map(|x| (x - mean) * inv).collect();
                    let dxhat: Vec<f64> = gr.iter().zip(gv).map(|(a, b)| a * b).collect();
                    let m1 = dxhat.iter().sum::<f64>() / n as f64;
                    let m2 = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                    for k in 0..n {
                        d_gain[k] += gr[k] * xhat[k];
                        d_bias[k] += gr[k];
                        dr[k] = inv * (dxhat[k] - m1 - xhat[k] * m2);
                    }
                }
                for (v, d) in [(*a, d_a), (*gain, d_gain), (*bias, d_bias)] {
                    if let Some(gv) = acc!(v) {
                        gv.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Concat(parts) => {
                let total = values[i].last_dim();
                let outer = values[i].outer();
                let mut offset = 0;
                for p in parts {
                    let w = values[p.0].last_dim();
                    if let Some(gp) = acc!(*p) {
                        for r in 0..outer {
                            let src = &g[r * total + offset..r * total + offset + w];
                            gp[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(x, y)| *x += y);
                        }
                    }
                    offset += w;
                }
            }
            Op::Slice(a, start, end) => {
                let n = values[a.0].last_dim();
                let w = end - start;
                if let Some(ga) = acc!(*a) {
                    for (r, gr) in g.chunks(w.max(1)).enumerate().take(values[a.0].outer()) {
                        ga[r * n + start..r * n + end].iter_mut().zip(gr).for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (values[a.0].shape()[0], values[a.0].shape()[1]);
                if let Some(ga) = acc!(*a) {
                    for r in 0..m {
                        for c in 0..n {
                            ga[r * n + c] += g[c * m + r];
                        }
                    }
                }
            }
            Op::Mean(a) => {
                let n = values[a.0].numel().max(1) as f64;
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().for_each(|x| *x += g[0] / n);
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().for_each(|x| *x += g[0]);
                }
            }
            Op::AbsSum(a) => {
                let x = values[a.0].data();
                if let Some(ga) = acc!(*a) {
                    for (d, &xv) in ga.iter_mut().zip(x) {
                        if xv > 0.0 {
                            *d += g[0];
                        } else if xv < 0.0 {
                            *d -= g[0];
                        }
                    }
                }
            }
            Op::Lookup(table, idx) => {
                let d = values[table.0].last_dim();
                if let Some(gt) = acc!(*table) {
                    for (k, &row) in idx.iter().enumerate() {
                        gt[row * d..(row + 1) * d]
                            .iter_mut()
                            .zip(&g[k * d..(k + 1) * d])
                            .for_each(|(x, y)| *x += y);
                    }
                }
            }
            Op::Gather(a, flat) => {
                if let Some(ga) = acc!(*a) {
                    for (k, &j) in flat.iter().enumerate() {
                        ga[j] += g[k];
                    }
                }
            }
        }
    }

    /// Adds the gradients of every parameter leaf into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (i, op) in self.ops.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (op, &self.grads[i]) {
                store.get_mut(*id).grad.iter_mut().zip(g).for_each(|(x, y)| *x += y);
            }
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Param(_) => "param",
        Op::MatMul(..) => "matmul",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::AddRow(..) => "add_row",
        Op::ScalarMul(..) => "scalar_mul",
        Op::AddScalar(..) => "add_scalar",
        Op::ScaleBy(..) => "scale_by",
        Op::Relu(_) => "relu",
        Op::MaxWithZero(_) => "max_with_zero",
        Op::Softmax(_) => "softmax_lastdim",
        Op::LayerNorm(..) => "layer_norm",
        Op::Concat(_) => "concat_lastdim",
        Op::Slice(..) => "slice",
        Op::Transpose(_) => "transpose",
        Op::Mean(_) => "mean",
        Op::Sum(_) => "sum",
        Op::AbsSum(_) => "abs_sum",
        Op::Lookup(..) => "embedding_lookup",
        Op::Gather(..) => "gather",
    }
}

const LN_EPS: f64 = 1e-5;

/// Row mean and reciprocal standard deviation.
fn row_moments(row: &[f64]) -> (f64, f64) {
    let n = row.len().max(1) as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, 1.0 / (var + LN_EPS).sqrt())
}

fn grad_slot<'a>(
    grads: &'a mut [Option<Vec<f64>>],
    values: &[Tensor],
    requires: &[bool],
    v: Var,
) -> Option<&'a mut Vec<f64>> {
    if !requires[v.0] {
        return None;
    }
    let n = values[v.0].numel();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; n]))
}
