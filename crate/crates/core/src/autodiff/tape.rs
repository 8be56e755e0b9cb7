//! Reverse-mode differentiation over a linear tape of tensor primitives.
//!
//! Every primitive appends one node holding its output value and the
//! inputs it read. [`Tape::backward`] walks the nodes in exact reverse
//! order, so the tape is topologically sorted by construction.

use crate::autodiff::params::{Bindings, ParamSet};
use crate::autodiff::tensor::Tensor;
use crate::error::{contract, Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Clamp(Var, S, S),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Slice { x: Var, start: usize, len: usize },
    Rows { x: Var, start: usize, len: usize },
    Embedding { table: Var, ids: Vec<usize> },
    Conv { x: Var, w: Var, width: usize },
    MaxOverTime { x: Var, argmax: Vec<usize> },
    Sum(Var),
    Mean(Var),
    Affine(Var, S),
    Reshape(Var),
    ScatterAdd { x: Var, index: Vec<usize> },
    Gather { x: Var, index: Vec<usize> },
}

#[derive(Clone, Debug)]
struct Node<S> {
    shape: Vec<usize>,
    data: Vec<S>,
    op: Op<S>,
    needs_grad: bool,
}

/// Per-node gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does
    /// not require a gradient or was unreachable from the loss.
    pub fn get(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

#[derive(Clone, Debug)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    check_finite: bool,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn strip_leading_ones(shape: &[usize]) -> &[usize] {
    let k = shape.iter().take_while(|&&d| d == 1).count();
    &shape[k..]
}

/// Output shape for an elementwise binary op: equal shapes, or one side
/// matches a trailing block of the other (leading-axis and scalar
/// broadcast).
fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a == b {
        return Ok(a.to_vec());
    }
    let (na, nb): (usize, usize) = (a.iter().product(), b.iter().product());
    let (big, small) = if na >= nb { (a, b) } else { (b, a) };
    let tail = strip_leading_ones(small);
    if tail.len() <= big.len() && big[big.len() - tail.len()..] == *tail {
        Ok(big.to_vec())
    } else {
        Err(Error::Shape {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        })
    }
}

fn dims2(op: &'static str, shape: &[usize]) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => contract(format!("{op}: expected a rank-2 tensor, got shape {shape:?}")),
    }
}

fn last_dim(shape: &[usize]) -> usize {
    shape.last().copied().unwrap_or(1)
}

fn add_into<S: Scalar>(buf: &mut [S], g: &[S]) {
    if buf.len() == g.len() {
        for (b, &v) in buf.iter_mut().zip(g) {
            *b = *b + v;
        }
    } else {
        let n = buf.len();
        for (i, &v) in g.iter().enumerate() {
            buf[i % n] = buf[i % n] + v;
        }
    }
}

impl<S: Scalar> Tape<S> {
    /// Tape with non-finite detection enabled in debug builds.
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[S] {
        &self.nodes[v.0].data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn item(&self, v: Var) -> S {
        self.nodes[v.0].data[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor<S> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.data.clone()).expect("tape node shape is consistent")
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, name: &'static str, shape: Vec<usize>, data: Vec<S>, op: Op<S>) -> Result<Var> {
        if self.check_finite && data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: name });
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            other => inputs(other).iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            shape,
            data,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a leaf; it receives a gradient iff `t.requires_grad`.
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        let requires_grad = t.requires_grad;
        let (shape, data) = t.into_parts();
        self.nodes.push(Node {
            shape,
            data,
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        let (shape, data) = t.into_parts();
        self.nodes.push(Node {
            shape,
            data,
            op: Op::Leaf,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records every parameter of `params` as a leaf.
    pub fn bind(&mut self, params: &ParamSet<S>) -> Bindings {
        let mut b = Bindings::default();
        for (name, t) in params.iter() {
            let mut leaf = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("parameter shape is consistent");
            leaf.requires_grad = t.requires_grad;
            b.insert(name.to_string(), self.leaf(leaf));
        }
        b
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2("matmul", self.shape(a))?;
        let (k2, n) = dims2("matmul", self.shape(b))?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let (ad, bd) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        let mut out = vec![S::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = ad[i * k + p];
                let brow = &bd[p * n..(p + 1) * n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o = *o + aip * bv;
                }
            }
        }
        self.push("matmul", vec![m, n], out, Op::MatMul(a, b))
    }

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(S, S) -> S, op: Op<S>) -> Result<Var> {
        let shape = broadcast_shape(name, self.shape(a), self.shape(b))?;
        let (ad, bd) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        let n = ad.len().max(bd.len());
        let (la, lb) = (ad.len(), bd.len());
        let out = (0..n).map(|i| f(ad[i % la], bd[i % lb])).collect();
        self.push(name, shape, out, op)
    }

    /// Elementwise sum; the smaller operand broadcasts over leading axes.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, name: &'static str, x: Var, f: impl Fn(S) -> S, op: Op<S>) -> Result<Var> {
        let n = &self.nodes[x.0];
        let out = n.data.iter().map(|&v| f(v)).collect();
        let shape = n.shape.clone();
        self.push(name, shape, out, op)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary("tanh", x, |v| v.tanh(), Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary("sigmoid", x, sigmoid, Op::Sigmoid(x))
    }

    /// Natural log. Inputs below the smallest positive normal are floored
    /// there (zero gradient), so the result is always finite.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        let floor = S::min_positive_value();
        self.unary("log", x, |v| v.max(floor).ln(), Op::Log(x))
    }

    pub fn clamp(&mut self, x: Var, lo: S, hi: S) -> Result<Var> {
        if lo > hi {
            return contract(format!("clamp: lower bound {lo} above upper bound {hi}"));
        }
        self.unary("clamp", x, |v| v.max(lo).min(hi), Op::Clamp(x, lo, hi))
    }

    /// `a * x + b` for scalar constants `a` and `b`.
    pub fn affine(&mut self, x: Var, a: S, b: S) -> Result<Var> {
        self.unary("affine", x, |v| a * v + b, Op::Affine(x, a))
    }

    pub fn scale(&mut self, x: Var, a: S) -> Result<Var> {
        self.affine(x, a, S::zero())
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let n = &self.nodes[x.0];
        let cols = last_dim(&n.shape);
        let mut out = n.data.clone();
        for row in out.chunks_mut(cols) {
            let m = row.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
            let mut z = S::zero();
            for v in row.iter_mut() {
                *v = (*v - m).exp();
                z = z + *v;
            }
            for v in row.iter_mut() {
                *v = *v / z;
            }
        }
        let shape = n.shape.clone();
        self.push("softmax", shape, out, Op::Softmax(x))
    }

    /// `log(softmax(x))` over the last axis via log-sum-exp.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let n = &self.nodes[x.0];
        let cols = last_dim(&n.shape);
        let mut out = n.data.clone();
        for row in out.chunks_mut(cols) {
            let m = row.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<S>().ln();
            for v in row.iter_mut() {
                *v = *v - lse;
            }
        }
        let shape = n.shape.clone();
        self.push("log_softmax", shape, out, Op::LogSoftmax(x))
    }

    /// Concatenates rank-2 tensors with equal row counts along the last axis.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return contract("concat: no inputs");
        }
        let (rows, _) = dims2("concat", self.shape(xs[0]))?;
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (r, c) = dims2("concat", self.shape(x))?;
            if r != rows {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.shape(xs[0]).to_vec(),
                    rhs: self.shape(x).to_vec(),
                });
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&x, &c) in xs.iter().zip(&widths) {
                out.extend_from_slice(&self.nodes[x.0].data[r * c..(r + 1) * c]);
            }
        }
        self.push("concat", vec![rows, total], out, Op::ConcatCols(xs.to_vec()))
    }

    /// Stacks rank-2 tensors with equal column counts along the first axis.
    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return contract("concat_rows: no inputs");
        }
        let (_, cols) = dims2("concat_rows", self.shape(xs[0]))?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &x in xs {
            let (r, c) = dims2("concat_rows", self.shape(x))?;
            if c != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: self.shape(xs[0]).to_vec(),
                    rhs: self.shape(x).to_vec(),
                });
            }
            rows += r;
            out.extend_from_slice(&self.nodes[x.0].data);
        }
        self.push("concat_rows", vec![rows, cols], out, Op::ConcatRows(xs.to_vec()))
    }

    /// Columns `start..start+len` of the last axis.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = last_dim(&shape);
        if len == 0 || start + len > cols {
            return contract(format!(
                "slice: range {start}..{} outside last axis of {shape:?}",
                start + len
            ));
        }
        let data = &self.nodes[x.0].data;
        let out: Vec<S> = data
            .chunks(cols)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let mut out_shape = shape;
        if let Some(last) = out_shape.last_mut() {
            *last = len;
        } else {
            out_shape = vec![len];
        }
        self.push("slice", out_shape, out, Op::Slice { x, start, len })
    }

    /// Rows `start..start+len` of a rank-2 tensor.
    pub fn rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = dims2("rows", self.shape(x))?;
        if len == 0 || start + len > r {
            return contract(format!("rows: range {start}..{} outside {r} rows", start + len));
        }
        let out = self.nodes[x.0].data[start * c..(start + len) * c].to_vec();
        self.push("rows", vec![len, c], out, Op::Rows { x, start, len })
    }

    /// Gathers rows of `table` (`[vocab, dim]`) into a `[ids.len(), dim]` tensor.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (v, d) = dims2("embedding", self.shape(table))?;
        if ids.is_empty() {
            return contract("embedding: empty id list");
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return contract(format!("embedding: id {bad} outside table of {v} rows"));
        }
        let data = &self.nodes[table.0].data;
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&data[i * d..(i + 1) * d]);
        }
        self.push(
            "embedding",
            vec![ids.len(), d],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    /// Valid convolution over time: `x` is `[len, dim]`, `w` is
    /// `[width * dim, filters]`; window `t` is rows `t..t+width` flattened.
    /// Output is `[len - width + 1, filters]`.
    pub fn conv_over_time(&mut self, x: Var, w: Var, width: usize) -> Result<Var> {
        let (len, d) = dims2("conv", self.shape(x))?;
        let (kd, f) = dims2("conv", self.shape(w))?;
        if width == 0 || kd != width * d || len < width {
            return Err(Error::Shape {
                op: "conv",
                lhs: vec![len, d],
                rhs: vec![kd, f],
            });
        }
        let windows = len - width + 1;
        let (xd, wd) = (&self.nodes[x.0].data, &self.nodes[w.0].data);
        let mut out = vec![S::zero(); windows * f];
        for t in 0..windows {
            let win = &xd[t * d..t * d + kd];
            let row = &mut out[t * f..(t + 1) * f];
            for (j, &xv) in win.iter().enumerate() {
                let wrow = &wd[j * f..(j + 1) * f];
                for (o, &wv) in row.iter_mut().zip(wrow) {
                    *o = *o + xv * wv;
                }
            }
        }
        self.push("conv", vec![windows, f], out, Op::Conv { x, w, width })
    }

    /// Column-wise maximum of a `[time, features]` tensor over the rows
    /// where `keep[t]` is true (all rows when `keep` is `None`). First
    /// maximal row wins ties.
    pub fn max_over_time(&mut self, x: Var, keep: Option<&[bool]>) -> Result<Var> {
        let (t, f) = dims2("max_over_time", self.shape(x))?;
        if let Some(k) = keep {
            if k.len() != t {
                return contract(format!("max_over_time: mask of {} for {t} steps", k.len()));
            }
            if !k.iter().any(|&b| b) {
                return contract("max_over_time: every time step masked");
            }
        }
        let data = &self.nodes[x.0].data;
        let mut best = vec![S::neg_infinity(); f];
        let mut argmax = vec![usize::MAX; f];
        for r in 0..t {
            if keep.is_some_and(|k| !k[r]) {
                continue;
            }
            for c in 0..f {
                let v = data[r * f + c];
                if argmax[c] == usize::MAX || v > best[c] {
                    best[c] = v;
                    argmax[c] = r;
                }
            }
        }
        self.push("max_over_time", vec![1, f], best, Op::MaxOverTime { x, argmax })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.nodes[x.0].data.iter().copied().sum();
        self.push("sum", vec![], vec![s], Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let d = &self.nodes[x.0].data;
        let s = d.iter().copied().sum::<S>() / S::lit(d.len() as f64);
        self.push("mean", vec![], vec![s], Op::Mean(x))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.nodes[x.0].data.len() || shape.contains(&0) {
            return Err(Error::Shape {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let out = self.nodes[x.0].data.clone();
        self.push("reshape", shape.to_vec(), out, Op::Reshape(x))
    }

    /// `out[index[i]] += x[i]` into a `[1, size]` row of zeros.
    pub fn scatter_add(&mut self, x: Var, index: &[usize], size: usize) -> Result<Var> {
        let data = &self.nodes[x.0].data;
        if index.len() != data.len() {
            return contract(format!(
                "scatter_add: {} indices for {} values",
                index.len(),
                data.len()
            ));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= size) {
            return contract(format!("scatter_add: index {bad} outside size {size}"));
        }
        let mut out = vec![S::zero(); size];
        for (&i, &v) in index.iter().zip(data) {
            out[i] = out[i] + v;
        }
        self.push(
            "scatter_add",
            vec![1, size],
            out,
            Op::ScatterAdd {
                x,
                index: index.to_vec(),
            },
        )
    }

    /// `[1, index.len()]` row of flat elements of `x`.
    pub fn gather(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let data = &self.nodes[x.0].data;
        if index.is_empty() {
            return contract("gather: empty index");
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= data.len()) {
            return contract(format!("gather: index {bad} outside {} elements", data.len()));
        }
        let out = index.iter().map(|&i| data[i]).collect();
        self.push(
            "gather",
            vec![1, index.len()],
            out,
            Op::Gather {
                x,
                index: index.to_vec(),
            },
        )
    }

    /// Propagates `d loss / d node` to every node that requires a gradient.
    /// `loss` must hold exactly one element.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        let ln = &self.nodes[loss.0];
        if ln.data.len() != 1 {
            return contract(format!("backward: loss must be scalar, got shape {:?}", ln.shape));
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; loss.0 + 1];
        if !ln.needs_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(vec![S::one()]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        // Intermediate gradients were consumed above; leaves keep theirs.
        Ok(Gradients { grads })
    }

    /// Writes accumulated gradients of bound parameters into `params`,
    /// adding to any gradient already present.
    pub fn accumulate_into(&self, params: &mut ParamSet<S>, bindings: &Bindings, grads: &Gradients<S>) {
        for (name, &v) in bindings.iter() {
            if let (Some(g), Some(t)) = (grads.get(v), params.get_mut(name)) {
                if !t.requires_grad {
                    continue;
                }
                let buf = t.grad.get_or_insert_with(|| vec![S::zero(); g.len()]);
                add_into(buf, g);
            }
        }
    }

    fn propagate(&self, node: &Node<S>, g: &[S], grads: &mut [Option<Vec<S>>]) {
        let nodes = &self.nodes;
        macro_rules! with_buf {
            ($v:expr, |$b:ident| $body:block) => {
                if let Some($b) = grad_buf(nodes, grads, $v) {
                    $body
                }
            };
        }
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (nodes[a.0].shape[0], nodes[a.0].shape[1]);
                let n = nodes[b.0].shape[1];
                let (ad, bd) = (&nodes[a.0].data, &nodes[b.0].data);
                with_buf!(*a, |ga| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bd[p * n..(p + 1) * n];
                            let s: S = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                            ga[i * k + p] = ga[i * k + p] + s;
                        }
                    }
                });
                with_buf!(*b, |gb| {
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            let row = &mut gb[p * n..(p + 1) * n];
                            for (o, &gv) in row.iter_mut().zip(grow) {
                                *o = *o + aip * gv;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                with_buf!(*a, |ga| { add_into(ga, g) });
                with_buf!(*b, |gb| { add_into(gb, g) });
            }
            Op::Sub(a, b) => {
                with_buf!(*a, |ga| { add_into(ga, g) });
                with_buf!(*b, |gb| {
                    let neg: Vec<S> = g.iter().map(|&v| -v).collect();
                    add_into(gb, &neg);
                });
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (&nodes[a.0].data, &nodes[b.0].data);
                let (la, lb) = (ad.len(), bd.len());
                with_buf!(*a, |ga| {
                    for (i, &gv) in g.iter().enumerate() {
                        ga[i % la] = ga[i % la] + gv * bd[i % lb];
                    }
                });
                with_buf!(*b, |gb| {
                    for (i, &gv) in g.iter().enumerate() {
                        gb[i % lb] = gb[i % lb] + gv * ad[i % la];
                    }
                });
            }
            Op::Tanh(x) => with_buf!(*x, |gx| {
                for ((o, &gv), &y) in gx.iter_mut().zip(g).zip(&node.data) {
                    *o = *o + gv * (S::one() - y * y);
                }
            }),
            Op::Sigmoid(x) => with_buf!(*x, |gx| {
                for ((o, &gv), &y) in gx.iter_mut().zip(g).zip(&node.data) {
                    *o = *o + gv * y * (S::one() - y);
                }
            }),
            Op::Softmax(x) => with_buf!(*x, |gx| {
                let cols = last_dim(&node.shape);
                for ((gr, yr), or) in g.chunks(cols).zip(node.data.chunks(cols)).zip(gx.chunks_mut(cols)) {
                    let dot: S = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                    for ((o, &gv), &y) in or.iter_mut().zip(gr).zip(yr) {
                        *o = *o + y * (gv - dot);
                    }
                }
            }),
            Op::LogSoftmax(x) => with_buf!(*x, |gx| {
                let cols = last_dim(&node.shape);
                for ((gr, yr), or) in g.chunks(cols).zip(node.data.chunks(cols)).zip(gx.chunks_mut(cols)) {
                    let total: S = gr.iter().copied().sum();
                    for ((o, &gv), &y) in or.iter_mut().zip(gr).zip(yr) {
                        *o = *o + gv - y.exp() * total;
                    }
                }
            }),
            Op::Log(x) => with_buf!(*x, |gx| {
                let floor = S::min_positive_value();
                for ((o, &gv), &v) in gx.iter_mut().zip(g).zip(&nodes[x.0].data) {
                    if v > floor {
                        *o = *o + gv / v;
                    }
                }
            }),
            Op::Clamp(x, lo, hi) => with_buf!(*x, |gx| {
                for ((o, &gv), &v) in gx.iter_mut().zip(g).zip(&nodes[x.0].data) {
                    if v >= *lo && v <= *hi {
                        *o = *o + gv;
                    }
                }
            }),
            Op::Affine(x, a) => with_buf!(*x, |gx| {
                for (o, &gv) in gx.iter_mut().zip(g) {
                    *o = *o + *a * gv;
                }
            }),
            Op::Reshape(x) => with_buf!(*x, |gx| { add_into(gx, g) }),
            Op::ConcatCols(xs) => {
                let rows = node.shape[0];
                let total = node.shape[1];
                let mut offset = 0;
                for &x in xs {
                    let c = nodes[x.0].shape[1];
                    with_buf!(x, |gx| {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + c];
                            add_into(&mut gx[r * c..(r + 1) * c], src);
                        }
                    });
                    offset += c;
                }
            }
            Op::ConcatRows(xs) => {
                let mut offset = 0;
                for &x in xs {
                    let len = nodes[x.0].data.len();
                    with_buf!(x, |gx| { add_into(gx, &g[offset..offset + len]) });
                    offset += len;
                }
            }
            Op::Slice { x, start, len } => with_buf!(*x, |gx| {
                let cols = last_dim(&nodes[x.0].shape);
                for (r, gr) in g.chunks(*len).enumerate() {
                    add_into(&mut gx[r * cols + start..r * cols + start + len], gr);
                }
            }),
            Op::Rows { x, start, len } => with_buf!(*x, |gx| {
                let c = nodes[x.0].shape[1];
                add_into(&mut gx[start * c..(start + len) * c], g);
            }),
            Op::Embedding { table, ids } => with_buf!(*table, |gt| {
                let d = nodes[table.0].shape[1];
                for (r, &id) in ids.iter().enumerate() {
                    add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                }
            }),
            Op::Conv { x, w, width } => {
                let d = nodes[x.0].shape[1];
                let f = nodes[w.0].shape[1];
                let kd = width * d;
                let windows = node.shape[0];
                let (xd, wd) = (&nodes[x.0].data, &nodes[w.0].data);
                with_buf!(*w, |gw| {
                    for t in 0..windows {
                        let grow = &g[t * f..(t + 1) * f];
                        for j in 0..kd {
                            let xv = xd[t * d + j];
                            let row = &mut gw[j * f..(j + 1) * f];
                            for (o, &gv) in row.iter_mut().zip(grow) {
                                *o = *o + xv * gv;
                            }
                        }
                    }
                });
                with_buf!(*x, |gx| {
                    for t in 0..windows {
                        let grow = &g[t * f..(t + 1) * f];
                        for j in 0..kd {
                            let wrow = &wd[j * f..(j + 1) * f];
                            let s: S = wrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
                            gx[t * d + j] = gx[t * d + j] + s;
                        }
                    }
                });
            }
            Op::MaxOverTime { x, argmax } => with_buf!(*x, |gx| {
                let f = argmax.len();
                for (c, (&r, &gv)) in argmax.iter().zip(g).enumerate() {
                    gx[r * f + c] = gx[r * f + c] + gv;
                }
            }),
            Op::Sum(x) => with_buf!(*x, |gx| {
                for o in gx.iter_mut() {
                    *o = *o + g[0];
                }
            }),
            Op::Mean(x) => with_buf!(*x, |gx| {
                let share = g[0] / S::lit(gx.len() as f64);
                for o in gx.iter_mut() {
                    *o = *o + share;
                }
            }),
            Op::ScatterAdd { x, index } => with_buf!(*x, |gx| {
                for (o, &i) in gx.iter_mut().zip(index) {
                    *o = *o + g[i];
                }
            }),
            Op::Gather { x, index } => with_buf!(*x, |gx| {
                for (&i, &gv) in index.iter().zip(g) {
                    gx[i] = gx[i] + gv;
                }
            }),
        }
    }
}

fn grad_buf<'a, S: Scalar>(nodes: &[Node<S>], grads: &'a mut [Option<Vec<S>>], v: Var) -> Option<&'a mut Vec<S>> {
    if !nodes[v.0].needs_grad {
        return None;
    }
    let len = nodes[v.0].data.len();
    Some(grads[v.0].get_or_insert_with(|| vec![S::zero(); len]))
}

fn inputs<S>(op: &Op<S>) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::Tanh(x)
        | Op::Sigmoid(x)
        | Op::Softmax(x)
        | Op::LogSoftmax(x)
        | Op::Log(x)
        | Op::Clamp(x, _, _)
        | Op::Sum(x)
        | Op::Mean(x)
        | Op::Affine(x, _)
        | Op::Reshape(x) => vec![*x],
        Op::ConcatCols(xs) | Op::ConcatRows(xs) => xs.clone(),
        Op::Slice { x, .. }
        | Op::Rows { x, .. }
        | Op::MaxOverTime { x, .. }
        | Op::ScatterAdd { x, .. }
        | Op::Gather { x, .. } => vec![*x],
        Op::Embedding { table, .. } => vec![*table],
        Op::Conv { x, w, .. } => vec![*x, *w],
    }
}

pub(crate) fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}
