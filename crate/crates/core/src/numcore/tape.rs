//! Wengert-list reverse-mode automatic differentiation over [`Array`]s.
//!
//! Every primitive appends one node holding its forward value and the
//! indices of its inputs. Parents always precede children, so the list
//! is a topological order and [`Tape::backward`] is a single reverse sweep.
//!
//! Primitive set: `add`, `sub`, `mul` (rank-2 broadcasting), `scale`,
//! `matmul`, `transpose`, `sigmoid`, `tanh`, `exp`, `log`, `abs`,
//! `log_sigmoid`, `sum`, `mean`, `concat`, `slice`, `softmax`,
//! `log_softmax`, `gather`, `group_max`, `reshape`. Layers compose these.

use std::sync::atomic::{AtomicU32, Ordering};

use super::array::{matmul_a_bt_into, matmul_at_b_into, Array, Shape};
use crate::error::{contract, Error, Result};

static NEXT_TAPE_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    idx: u32,
}

impl Var {
    /// Position of this value within its tape.
    pub fn node_id(self) -> usize {
        self.idx as usize
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    MatMul(usize, usize),
    Transpose(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Log(usize),
    Abs(usize),
    LogSigmoid(usize),
    Sum(usize),
    Mean(usize),
    Concat { parts: Vec<usize>, axis: usize },
    Slice { src: usize, axis: usize, start: usize },
    Softmax(usize),
    LogSoftmax(usize),
    Gather { src: usize, index: Vec<Option<usize>> },
    GroupMax { src: usize, argmax: Vec<usize> },
    Reshape(usize),
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) => vec![*a, *b],
            Scale(a, _) | Transpose(a) | Sigmoid(a) | Tanh(a) | Exp(a) | Log(a) | Abs(a)
            | LogSigmoid(a) | Sum(a) | Mean(a) | Softmax(a) | LogSoftmax(a) | Reshape(a) => {
                vec![*a]
            }
            Concat { parts, .. } => parts.clone(),
            Slice { src, .. } | Gather { src, .. } | GroupMax { src, .. } => vec![*src],
        }
    }
}

struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// A single-owner computation tape.
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
    grads: Vec<Option<Array>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(x)` without overflow for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> Var {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self.id,
            idx: idx as u32,
        }
    }

    fn check(&self, v: Var) -> Result<usize> {
        contract!(
            v.tape == self.id && (v.idx as usize) < self.nodes.len(),
            "value does not belong to this tape"
        );
        Ok(v.idx as usize)
    }

    fn push_op(&mut self, value: Array, op: Op) -> Var {
        let rg = op.parents().iter().any(|&p| self.nodes[p].requires_grad);
        self.push(value, op, rg)
    }

    /// Trainable input; gradients flow into it.
    pub fn param(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input excluded from differentiation.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Forward value of `v`.
    ///
    /// Panics if `v` was recorded on another tape.
    pub fn value(&self, v: Var) -> &Array {
        let i = self.check(v).expect("foreign Var");
        &self.nodes[i].value
    }

    /// Gradient of the last backward pass with respect to `v`, if `v` was reachable.
    pub fn grad(&self, v: Var) -> Option<&Array> {
        let i = self.check(v).ok()?;
        self.grads.get(i).and_then(|g| g.as_ref())
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.check(v)
            .map(|i| self.nodes[i].requires_grad)
            .unwrap_or(false)
    }

    // ---- elementwise binary ops with rank-2 broadcasting ----

    fn broadcast_dims(&self, a: usize, b: usize, what: &str) -> Result<Vec<usize>> {
        let da = self.nodes[a].value.dims();
        let db = self.nodes[b].value.dims();
        if da == db {
            return Ok(da.to_vec());
        }
        contract!(
            da.len() == 2 && db.len() == 2,
            "{what}: shapes {da:?} and {db:?} are not broadcast-compatible"
        );
        let mut out = [0usize; 2];
        for k in 0..2 {
            out[k] = da[k].max(db[k]);
            contract!(
                (da[k] == out[k] || da[k] == 1) && (db[k] == out[k] || db[k] == 1),
                "{what}: shapes {da:?} and {db:?} are not broadcast-compatible"
            );
        }
        Ok(out.to_vec())
    }

    fn binary(&mut self, a: Var, b: Var, kind: u8) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let name = ["add", "sub", "mul"][kind as usize];
        let dims = self.broadcast_dims(ia, ib, name)?;
        let f = |x: f64, y: f64| match kind {
            0 => x + y,
            1 => x - y,
            _ => x * y,
        };
        let va = &self.nodes[ia].value;
        let vb = &self.nodes[ib].value;
        let data: Vec<f64> = if va.dims() == vb.dims() {
            va.data()
                .iter()
                .zip(vb.data())
                .map(|(&x, &y)| f(x, y))
                .collect()
        } else {
            let (r, c) = (dims[0], dims[1]);
            let mut out = Vec::with_capacity(r * c);
            for i in 0..r {
                for j in 0..c {
                    out.push(f(bcast_get(va, i, j), bcast_get(vb, i, j)));
                }
            }
            out
        };
        let value = Array::from_parts(Shape::new(&dims)?, data);
        let op = match kind {
            0 => Op::Add(ia, ib),
            1 => Op::Sub(ia, ib),
            _ => Op::Mul(ia, ib),
        };
        Ok(self.push_op(value, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, 0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, 1)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, 2)
    }

    /// Multiplication by a fixed constant.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.check(a)?;
        let value = self.nodes[ia].value.map(|x| x * c);
        Ok(self.push_op(value, Op::Scale(ia, c)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let value = self.nodes[ia].value.matmul(&self.nodes[ib].value)?;
        Ok(self.push_op(value, Op::MatMul(ia, ib)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let value = self.nodes[ia].value.transpose()?;
        Ok(self.push_op(value, Op::Transpose(ia)))
    }

    // ---- elementwise unary ----

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: impl Fn(usize) -> Op) -> Result<Var> {
        let ia = self.check(a)?;
        let value = self.nodes[ia].value.map(f);
        Ok(self.push_op(value, op(ia)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, sigmoid, Op::Sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::tanh, Op::Tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::exp, Op::Exp)
    }

    /// Natural log; every input element must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        contract!(
            self.nodes[ia].value.data().iter().all(|&x| x > 0.0),
            "log of a non-positive value"
        );
        self.unary(a, f64::ln, Op::Log)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, f64::abs, Op::Abs)
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, log_sigmoid, Op::LogSigmoid)
    }

    // ---- reductions ----

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let s = self.nodes[ia].value.sum();
        Ok(self.push_op(Array::scalar(s), Op::Sum(ia)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let v = &self.nodes[ia].value;
        let m = v.sum() / v.len() as f64;
        Ok(self.push_op(Array::scalar(m), Op::Mean(ia)))
    }

    // ---- structural ----

    /// Joins rank-2 values along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        contract!(!parts.is_empty(), "concat of zero parts");
        contract!(axis < 2, "concat axis must be 0 or 1");
        let idx: Vec<usize> = parts.iter().map(|&p| self.check(p)).collect::<Result<_>>()?;
        let mut dims = Vec::with_capacity(idx.len());
        for &i in &idx {
            dims.push(self.nodes[i].value.matrix_dims()?);
        }
        let (r0, c0) = dims[0];
        let value = if axis == 0 {
            contract!(
                dims.iter().all(|d| d.1 == c0),
                "concat rows: column counts differ"
            );
            let rows: usize = dims.iter().map(|d| d.0).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for &i in &idx {
                data.extend_from_slice(self.nodes[i].value.data());
            }
            Array::from_vec(&[rows, c0], data)?
        } else {
            contract!(
                dims.iter().all(|d| d.0 == r0),
                "concat columns: row counts differ"
            );
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for r in 0..r0 {
                for &i in &idx {
                    data.extend_from_slice(self.nodes[i].value.row(r));
                }
            }
            Array::from_vec(&[r0, cols], data)?
        };
        Ok(self.push_op(value, Op::Concat { parts: idx, axis }))
    }

    /// Contiguous range `start..start+len` of a rank-2 value along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let ia = self.check(a)?;
        let (r, c) = self.nodes[ia].value.matrix_dims()?;
        contract!(axis < 2, "slice axis must be 0 or 1");
        let extent = if axis == 0 { r } else { c };
        contract!(
            len > 0 && start + len <= extent,
            "slice {start}..{} out of range {extent}",
            start + len
        );
        let src = &self.nodes[ia].value;
        let value = if axis == 0 {
            Array::from_vec(&[len, c], src.data()[start * c..(start + len) * c].to_vec())?
        } else {
            let mut data = Vec::with_capacity(r * len);
            for i in 0..r {
                data.extend_from_slice(&src.row(i)[start..start + len]);
            }
            Array::from_vec(&[r, len], data)?
        };
        Ok(self.push_op(value, Op::Slice { src: ia, axis, start }))
    }

    /// Row-wise softmax of a rank-2 value (max-subtracted).
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let v = &self.nodes[ia].value;
        let (r, c) = v.matrix_dims()?;
        let mut data = v.data().to_vec();
        for i in 0..r {
            softmax_row(&mut data[i * c..(i + 1) * c]);
        }
        let value = Array::from_vec(&[r, c], data)?;
        Ok(self.push_op(value, Op::Softmax(ia)))
    }

    /// Row-wise log-softmax of a rank-2 value (max-subtracted).
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let ia = self.check(a)?;
        let v = &self.nodes[ia].value;
        let (r, c) = v.matrix_dims()?;
        let mut data = v.data().to_vec();
        for i in 0..r {
            let row = &mut data[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let value = Array::from_vec(&[r, c], data)?;
        Ok(self.push_op(value, Op::LogSoftmax(ia)))
    }

    /// Builds a value of shape `dims` whose k-th element is `a[index[k]]`
    /// (flat row-major), or zero where `index[k]` is `None`.
    pub fn gather(&mut self, a: Var, index: Vec<Option<usize>>, dims: &[usize]) -> Result<Var> {
        let ia = self.check(a)?;
        let shape = Shape::new(dims)?;
        contract!(
            shape.numel() == index.len(),
            "gather: {} indices for shape {shape}",
            index.len()
        );
        let src = self.nodes[ia].value.data();
        contract!(
            index.iter().flatten().all(|&i| i < src.len()),
            "gather index out of range"
        );
        let data = index
            .iter()
            .map(|i| i.map_or(0.0, |i| src[i]))
            .collect();
        let value = Array::from_parts(shape, data);
        Ok(self.push_op(value, Op::Gather { src: ia, index }))
    }

    /// Builds a value of shape `dims` whose k-th element is the max of
    /// `a` over the flat positions in `groups[k]`.
    pub fn group_max(&mut self, a: Var, groups: &[Vec<usize>], dims: &[usize]) -> Result<Var> {
        let ia = self.check(a)?;
        let shape = Shape::new(dims)?;
        contract!(
            shape.numel() == groups.len(),
            "group_max: {} groups for shape {shape}",
            groups.len()
        );
        let src = self.nodes[ia].value.data();
        let mut argmax = Vec::with_capacity(groups.len());
        let mut data = Vec::with_capacity(groups.len());
        for g in groups {
            contract!(!g.is_empty(), "group_max: empty group");
            let mut best = g[0];
            for &i in g {
                contract!(i < src.len(), "group_max index out of range");
                if src[i] > src[best] {
                    best = i;
                }
            }
            argmax.push(best);
            data.push(src[best]);
        }
        let value = Array::from_parts(shape, data);
        Ok(self.push_op(value, Op::GroupMax { src: ia, argmax }))
    }

    pub fn reshape(&mut self, a: Var, dims: &[usize]) -> Result<Var> {
        let ia = self.check(a)?;
        let value = self.nodes[ia].value.reshape(dims)?;
        Ok(self.push_op(value, Op::Reshape(ia)))
    }

    // ---- backward ----

    /// Populates gradients of the scalar `loss` with respect to every value
    /// it depends on. Earlier gradients are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let li = self.check(loss)?;
        contract!(
            self.nodes[li].value.len() == 1,
            "backward needs a scalar loss, got shape {}",
            self.nodes[li].value.shape()
        );
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[li] = Some(Array::from_parts(
            self.nodes[li].value.shape().clone(),
            vec![1.0],
        ));
        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                grads[i] = Some(g);
                continue;
            }
            for p in self.nodes[i].op.parents() {
                if p >= i {
                    return Err(Error::Contract(format!(
                        "graph cycle: node {i} depends on node {p}"
                    )));
                }
            }
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Array, grads: &mut [Option<Array>]) -> Result<()> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |k: usize| &self.nodes[k].value;
        let rg = |k: usize| self.nodes[k].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if rg(*a) {
                    let ga = reduce_broadcast(g, val(*a), |_, _, gv| gv);
                    accumulate(grads, *a, ga);
                }
                if rg(*b) {
                    let gb = reduce_broadcast(g, val(*b), |_, _, gv| sign * gv);
                    accumulate(grads, *b, gb);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if rg(*a) {
                    let ga = reduce_broadcast(g, va, |r, c, gv| gv * bcast_get(vb, r, c));
                    accumulate(grads, *a, ga);
                }
                if rg(*b) {
                    let gb = reduce_broadcast(g, vb, |r, c, gv| gv * bcast_get(va, r, c));
                    accumulate(grads, *b, gb);
                }
            }
            Op::Scale(a, c) => {
                if rg(*a) {
                    accumulate(grads, *a, g.map(|x| x * c));
                }
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let (n, k) = va.matrix_dims()?;
                let m = vb.matrix_dims()?.1;
                if rg(*a) {
                    let mut ga = vec![0.0; n * k];
                    matmul_a_bt_into(g.data(), vb.data(), &mut ga, n, m, k);
                    accumulate(grads, *a, Array::from_parts(va.shape().clone(), ga));
                }
                if rg(*b) {
                    let mut gb = vec![0.0; k * m];
                    matmul_at_b_into(va.data(), g.data(), &mut gb, n, k, m);
                    accumulate(grads, *b, Array::from_parts(vb.shape().clone(), gb));
                }
            }
            Op::Transpose(a) => {
                if rg(*a) {
                    accumulate(grads, *a, g.transpose()?);
                }
            }
            Op::Sigmoid(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, y, |gv, yv| gv * yv * (1.0 - yv)));
                }
            }
            Op::Tanh(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, y, |gv, yv| gv * (1.0 - yv * yv)));
                }
            }
            Op::Exp(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, y, |gv, yv| gv * yv));
                }
            }
            Op::Log(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, val(*a), |gv, x| gv / x));
                }
            }
            Op::Abs(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, val(*a), |gv, x| gv * sign(x)));
                }
            }
            Op::LogSigmoid(a) => {
                if rg(*a) {
                    accumulate(grads, *a, zip_map(g, val(*a), |gv, x| gv * sigmoid(-x)));
                }
            }
            Op::Sum(a) | Op::Mean(a) => {
                if rg(*a) {
                    let va = val(*a);
                    let mut s = g.data()[0];
                    if matches!(node.op, Op::Mean(_)) {
                        s /= va.len() as f64;
                    }
                    accumulate(
                        grads,
                        *a,
                        Array::from_parts(va.shape().clone(), vec![s; va.len()]),
                    );
                }
            }
            Op::Concat { parts, axis } => {
                let (_, cols) = g.matrix_dims()?;
                let mut offset = 0;
                for &p in parts {
                    let (pr, pc) = val(p).matrix_dims()?;
                    if rg(p) {
                        let gp = if *axis == 0 {
                            g.data()[offset * cols..(offset + pr) * cols].to_vec()
                        } else {
                            let mut d = Vec::with_capacity(pr * pc);
                            for r in 0..pr {
                                d.extend_from_slice(&g.row(r)[offset..offset + pc]);
                            }
                            d
                        };
                        accumulate(grads, p, Array::from_parts(val(p).shape().clone(), gp));
                    }
                    offset += if *axis == 0 { pr } else { pc };
                }
            }
            Op::Slice { src, axis, start } => {
                if rg(*src) {
                    let vs = val(*src);
                    let (r, c) = vs.matrix_dims()?;
                    let (gr, gc) = g.matrix_dims()?;
                    let mut d = vec![0.0; r * c];
                    if *axis == 0 {
                        d[start * c..(start + gr) * c].copy_from_slice(g.data());
                    } else {
                        for i in 0..r {
                            d[i * c + start..i * c + start + gc].copy_from_slice(g.row(i));
                        }
                    }
                    accumulate(grads, *src, Array::from_parts(vs.shape().clone(), d));
                }
            }
            Op::Softmax(a) => {
                if rg(*a) {
                    let (r, c) = y.matrix_dims()?;
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..c {
                            d[i * c + j] = yr[j] * (gr[j] - dot);
                        }
                    }
                    accumulate(grads, *a, Array::from_parts(y.shape().clone(), d));
                }
            }
            Op::LogSoftmax(a) => {
                if rg(*a) {
                    let (r, c) = y.matrix_dims()?;
                    let mut d = vec![0.0; r * c];
                    for i in 0..r {
                        let (yr, gr) = (y.row(i), g.row(i));
                        let gs: f64 = gr.iter().sum();
                        for j in 0..c {
                            d[i * c + j] = gr[j] - yr[j].exp() * gs;
                        }
                    }
                    accumulate(grads, *a, Array::from_parts(y.shape().clone(), d));
                }
            }
            Op::Gather { src, index } => {
                if rg(*src) {
                    let vs = val(*src);
                    let mut d = vec![0.0; vs.len()];
                    for (k, ix) in index.iter().enumerate() {
                        if let Some(ix) = ix {
                            d[*ix] += g.data()[k];
                        }
                    }
                    accumulate(grads, *src, Array::from_parts(vs.shape().clone(), d));
                }
            }
            Op::GroupMax { src, argmax } => {
                if rg(*src) {
                    let vs = val(*src);
                    let mut d = vec![0.0; vs.len()];
                    for (k, &ix) in argmax.iter().enumerate() {
                        d[ix] += g.data()[k];
                    }
                    accumulate(grads, *src, Array::from_parts(vs.shape().clone(), d));
                }
            }
            Op::Reshape(a) => {
                if rg(*a) {
                    let va = val(*a);
                    accumulate(
                        grads,
                        *a,
                        Array::from_parts(va.shape().clone(), g.data().to_vec()),
                    );
                }
            }
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn softmax_row(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in row.iter_mut() {
        *x /= s;
    }
}

#[inline]
fn bcast_get(a: &Array, i: usize, j: usize) -> f64 {
    let d = a.dims();
    if d.len() != 2 {
        return a.data()[i * d[d.len() - 1] + j];
    }
    let r = if d[0] == 1 { 0 } else { i };
    let c = if d[1] == 1 { 0 } else { j };
    a.data()[r * d[1] + c]
}

/// Maps the upstream gradient `g` (output shape) onto `target`'s shape,
/// summing over broadcast dimensions.
fn reduce_broadcast(g: &Array, target: &Array, f: impl Fn(usize, usize, f64) -> f64) -> Array {
    if g.dims() == target.dims() {
        let d = g.dims();
        let cols = d[d.len() - 1];
        let data = g
            .data()
            .iter()
            .enumerate()
            .map(|(k, &gv)| f(k / cols, k % cols, gv))
            .collect();
        return Array::from_parts(target.shape().clone(), data);
    }
    let (r, c) = (g.dims()[0], g.dims()[1]);
    let td = target.dims();
    let mut out = vec![0.0; target.len()];
    for i in 0..r {
        let ti = if td[0] == 1 { 0 } else { i };
        for j in 0..c {
            let tj = if td[1] == 1 { 0 } else { j };
            out[ti * td[1] + tj] += f(i, j, g.data()[i * c + j]);
        }
    }
    Array::from_parts(target.shape().clone(), out)
}

fn zip_map(g: &Array, other: &Array, f: impl Fn(f64, f64) -> f64) -> Array {
    let data = g
        .data()
        .iter()
        .zip(other.data())
        .map(|(&a, &b)| f(a, b))
        .collect();
    Array::from_parts(other.shape().clone(), data)
}

fn accumulate(grads: &mut [Option<Array>], idx: usize, g: Array) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
