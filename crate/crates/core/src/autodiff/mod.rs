//! Tape-based reverse-mode differentiation over dense row-major matrices.
//!
//! Every value on a [`Tape`] is a 2-D matrix. Operations append a node that
//! records its inputs; [`Tape::backward`] replays the tape in reverse and
//! accumulates gradients into every node that (transitively) depends on a
//! parameter. [`Tape::reset`] clears a tape for the next forward pass while
//! keeping its buffers.

mod gradcheck;
mod kernels;
mod optim;

pub use gradcheck::{compare_gradients, compare_gradients_at, gradcheck, GradcheckReport, GRADCHECK_FLOOR};
pub use optim::{Adam, AdamConfig};

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::error::{Error, Result};
use kernels::{axpy, dot, gemm, View};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch { op: "matrix", left: (rows, cols), right: (data.len(), 1) });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Index of the largest entry in every row (first one on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&self) -> Matrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            softmax_in_place(&mut out.data[r * self.cols..(r + 1) * self.cols]);
        }
        out
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = crate::math::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Edge list shared between ops that scatter along graph edges.
#[derive(Clone, Debug)]
pub struct EdgeIndex {
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    pub num_nodes: usize,
}

impl EdgeIndex {
    pub fn new(src: Vec<usize>, dst: Vec<usize>, num_nodes: usize) -> Result<Self> {
        if src.len() != dst.len() {
            return Err(Error::ShapeMismatch { op: "edge index", left: (src.len(), 1), right: (dst.len(), 1) });
        }
        if src.iter().chain(dst.iter()).any(|&i| i >= num_nodes) {
            return Err(Error::Validation("edge endpoint out of range".into()));
        }
        Ok(EdgeIndex { src: src.into(), dst: dst.into(), num_nodes })
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Fixed inputs of the weighted cross-entropy loss.
#[derive(Clone, Debug)]
pub struct LossTargets {
    pub targets: Rc<[usize]>,
    pub class_weights: Rc<[f64]>,
    /// Rows that contribute to the loss.
    pub mask: Rc<[bool]>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    Elu(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sum(usize),
    HeadDot { x: usize, att: usize, heads: usize },
    Gather { x: usize, index: Rc<[usize]> },
    SegmentSoftmax { x: usize, segments: Rc<[usize]> },
    EdgeAggregate { alpha: usize, x: usize, edges: EdgeIndex },
    HeadMean { x: usize, heads: usize },
    Conv1d { x: usize, w: usize, b: usize, in_channels: usize, length: usize },
    WeightedCe { logits: usize, targets: LossTargets, probs: Vec<f64>, norm: f64 },
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Vec<f64>,
    needs_grad: bool,
    op: Op,
}

/// Recording of one forward pass.
///
/// Buffers released by [`reset`](Self::reset) are kept and handed out again,
/// so a training loop that reuses one tape stops allocating after the first
/// epoch.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    pool: RefCell<Vec<Vec<f64>>>,
}

const POOL_CAP: usize = 1024;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Drops every recorded node while keeping its storage for reuse.
    pub fn reset(&mut self) {
        let nodes = core::mem::take(&mut self.nodes);
        for n in nodes {
            self.recycle(n.value);
            self.recycle(n.grad);
            if let Op::WeightedCe { probs, .. } = n.op {
                self.recycle(probs);
            }
        }
    }

    fn recycle(&self, buf: Vec<f64>) {
        let mut pool = self.pool.borrow_mut();
        if buf.capacity() > 0 && pool.len() < POOL_CAP {
            pool.push(buf);
        }
    }

    /// Empty buffer with room for at least `len` values; the smallest
    /// fitting pooled buffer wins.
    fn take(&self, len: usize) -> Vec<f64> {
        let mut pool = self.pool.borrow_mut();
        let best = pool
            .iter()
            .enumerate()
            .filter(|(_, b)| b.capacity() >= len)
            .min_by_key(|(_, b)| b.capacity())
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let mut b = pool.swap_remove(i);
                b.clear();
                b
            }
            None => Vec::with_capacity(len),
        }
    }

    fn zeroed(&self, len: usize) -> Vec<f64> {
        let mut b = self.take(len);
        b.resize(len, 0.0);
        b
    }

    fn buf_from(&self, it: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut b = self.take(it.size_hint().0);
        b.extend(it);
        b
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, m: &Matrix) -> Var {
        self.leaf(m.rows, m.cols, self.buf_from(m.data.iter().copied()), true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.leaf(m.rows, m.cols, m.data, false)
    }

    fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>, needs_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { rows, cols, value, grad: Vec::new(), needs_grad, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, inputs: &[usize], op: Op) -> Var {
        let needs_grad = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node { rows, cols, value, grad: Vec::new(), needs_grad, op });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn to_matrix(&self, v: Var) -> Matrix {
        let n = &self.nodes[v.0];
        Matrix { rows: n.rows, cols: n.cols, data: n.value.clone() }
    }

    /// Scalar value of a `1x1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// Gradient of the last [`backward`](Self::backward) output with respect
    /// to `v`; zeros when `v` does not influence it.
    pub fn grad(&self, v: Var) -> Vec<f64> {
        let n = &self.nodes[v.0];
        if n.grad.is_empty() {
            self.zeroed(n.rows * n.cols)
        } else {
            n.grad.clone()
        }
    }

    fn val(&self, i: usize) -> &[f64] {
        &self.nodes[i].value
    }

    fn dims(&self, i: usize) -> (usize, usize) {
        (self.nodes[i].rows, self.nodes[i].cols)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (l, r) = (self.shape(a), self.shape(b));
        if l != r {
            return Err(Error::ShapeMismatch { op, left: l, right: r });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ((m, k), (k2, n)) = (self.shape(a), self.shape(b));
        if k != k2 {
            return Err(Error::ShapeMismatch { op: "matmul", left: (m, k), right: (k2, n) });
        }
        let mut out = self.zeroed(m * n);
        gemm(1.0, View::dense(self.val(a.0), m, k), View::dense(self.val(b.0), k, n), 0.0, &mut out);
        Ok(self.push(m, n, out, &[a.0, b.0], Op::MatMul(a.0, b.0)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.buf_from(self.val(a.0).iter().zip(self.val(b.0)).map(|(x, y)| x + y));
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, &[a.0, b.0], Op::Add(a.0, b.0)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.buf_from(self.val(a.0).iter().zip(self.val(b.0)).map(|(x, y)| x * y));
        let (r, c) = self.shape(a);
        Ok(self.push(r, c, out, &[a.0, b.0], Op::Mul(a.0, b.0)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.buf_from(self.val(a.0).iter().map(|x| x * s));
        let (r, c) = self.shape(a);
        self.push(r, c, out, &[a.0], Op::Scale(a.0, s))
    }

    /// Adds the `1 x cols` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let ((r, c), bs) = (self.shape(a), self.shape(bias));
        if bs != (1, c) {
            return Err(Error::ShapeMismatch { op: "add_row", left: (r, c), right: bs });
        }
        let b = self.val(bias.0);
        let mut out = self.buf_from(self.val(a.0).iter().copied());
        for row in out.chunks_exact_mut(c.max(1)) {
            row.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(self.push(r, c, out, &[a.0, bias.0], Op::AddRow(a.0, bias.0)))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let out = self.buf_from(self.val(a.0).iter().map(|&x| f(x)));
        let (r, c) = self.shape(a);
        self.push(r, c, out, &[a.0], op)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { crate::math::exp_m1(x) }, Op::Elu(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a.0, slope))
    }

    /// Sum of all entries as a `1x1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.val(a.0).iter().sum();
        self.push(1, 1, vec![s], &[a.0], Op::Sum(a.0))
    }

    /// Per-head dot product: `x` is `[N, heads*F]`, `att` is `[1, heads*F]`,
    /// the result is `[N, heads]`.
    pub fn head_dot(&mut self, x: Var, att: Var, heads: usize) -> Result<Var> {
        let ((n, hf), ashape) = (self.shape(x), self.shape(att));
        if heads == 0 || hf % heads != 0 || ashape != (1, hf) {
            return Err(Error::ShapeMismatch { op: "head_dot", left: (n, hf), right: ashape });
        }
        let f = hf / heads;
        let (xv, av) = (self.val(x.0), self.val(att.0));
        let mut out = self.zeroed(n * heads);
        for i in 0..n {
            for h in 0..heads {
                let xs = &xv[i * hf + h * f..i * hf + (h + 1) * f];
                out[i * heads + h] = dot(xs, &av[h * f..(h + 1) * f]);
            }
        }
        Ok(self.push(n, heads, out, &[x.0, att.0], Op::HeadDot { x: x.0, att: att.0, heads }))
    }

    /// Row gather: `out[e] = x[index[e]]`.
    pub fn gather_rows(&mut self, x: Var, index: Rc<[usize]>) -> Result<Var> {
        let (n, c) = self.shape(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(Error::ShapeMismatch { op: "gather_rows", left: (n, c), right: (bad, c) });
        }
        let xv = self.val(x.0);
        let mut out = self.take(index.len() * c);
        for &i in index.iter() {
            out.extend_from_slice(&xv[i * c..(i + 1) * c]);
        }
        let e = index.len();
        Ok(self.push(e, c, out, &[x.0], Op::Gather { x: x.0, index }))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(&mut self, x: Var, segments: Rc<[usize]>, num_segments: usize) -> Result<Var> {
        let (e, c) = self.shape(x);
        if segments.len() != e || segments.iter().any(|&s| s >= num_segments) {
            return Err(Error::ShapeMismatch { op: "segment_softmax", left: (e, c), right: (segments.len(), 1) });
        }
        let xv = self.val(x.0);
        let mut max = self.buf_from(core::iter::repeat_n(f64::NEG_INFINITY, num_segments * c));
        for (r, &s) in segments.iter().enumerate() {
            for j in 0..c {
                let m = &mut max[s * c + j];
                *m = m.max(xv[r * c + j]);
            }
        }
        let mut out = self.zeroed(e * c);
        let mut sum = self.zeroed(num_segments * c);
        for (r, &s) in segments.iter().enumerate() {
            for j in 0..c {
                let v = crate::math::exp(xv[r * c + j] - max[s * c + j]);
                out[r * c + j] = v;
                sum[s * c + j] += v;
            }
        }
        for (r, &s) in segments.iter().enumerate() {
            for j in 0..c {
                out[r * c + j] /= sum[s * c + j];
            }
        }
        self.recycle(max);
        self.recycle(sum);
        Ok(self.push(e, c, out, &[x.0], Op::SegmentSoftmax { x: x.0, segments }))
    }

    /// Attention-weighted message passing: for every edge `e` and head `h`,
    /// `out[dst_e, head h block] += alpha[e, h] * x[src_e, head h block]`.
    /// `alpha` is `[E, heads]`, `x` is `[N, heads*F]`.
    pub fn edge_aggregate(&mut self, alpha: Var, x: Var, edges: &EdgeIndex) -> Result<Var> {
        let ((e, heads), (n, hf)) = (self.shape(alpha), self.shape(x));
        if e != edges.len() || n != edges.num_nodes || heads == 0 || hf % heads != 0 {
            return Err(Error::ShapeMismatch { op: "edge_aggregate", left: (e, heads), right: (n, hf) });
        }
        let f = hf / heads;
        let (av, xv) = (self.val(alpha.0), self.val(x.0));
        let mut out = self.zeroed(n * hf);
        for k in 0..e {
            let (s, d) = (edges.src[k], edges.dst[k]);
            let xs = &xv[s * hf..(s + 1) * hf];
            let os = &mut out[d * hf..(d + 1) * hf];
            for ((o, x), &a) in os.chunks_exact_mut(f).zip(xs.chunks_exact(f)).zip(&av[k * heads..(k + 1) * heads]) {
                axpy(a, x, o);
            }
        }
        let op = Op::EdgeAggregate { alpha: alpha.0, x: x.0, edges: edges.clone() };
        Ok(self.push(n, hf, out, &[alpha.0, x.0], op))
    }

    /// Average of the `heads` column blocks of `x` (`[N, heads*F]` to `[N, F]`).
    pub fn head_mean(&mut self, x: Var, heads: usize) -> Result<Var> {
        let (n, hf) = self.shape(x);
        if heads == 0 || hf % heads != 0 {
            return Err(Error::ShapeMismatch { op: "head_mean", left: (n, hf), right: (heads, 1) });
        }
        let f = hf / heads;
        let xv = self.val(x.0);
        let mut out = self.zeroed(n * f);
        for i in 0..n {
            for h in 0..heads {
                for j in 0..f {
                    out[i * f + j] += xv[i * hf + h * f + j] / heads as f64;
                }
            }
        }
        Ok(self.push(n, f, out, &[x.0], Op::HeadMean { x: x.0, heads }))
    }

    /// Valid (unpadded, stride 1) 1-D convolution.
    ///
    /// `x` is `[B, L*C_in]` stored time-major (`x[b, t*C_in + c]`), `w` is
    /// `[K*C_in, C_out]` and `b` is `[1, C_out]`. The result is
    /// `[B, (L-K+1)*C_out]`, again time-major.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, in_channels: usize) -> Result<Var> {
        let ((batch, lc), (kc, c_out), bs) = (self.shape(x), self.shape(w), self.shape(b));
        let bad = Error::ShapeMismatch { op: "conv1d", left: (batch, lc), right: (kc, c_out) };
        if in_channels == 0 || lc % in_channels != 0 || kc % in_channels != 0 || bs != (1, c_out) {
            return Err(bad);
        }
        let (length, k) = (lc / in_channels, kc / in_channels);
        if k == 0 || k > length {
            return Err(bad);
        }
        let l_out = length - k + 1;
        let (xv, wv, bv) = (self.val(x.0), self.val(w.0), self.val(b.0));
        let mut out = self.zeroed(batch * l_out * c_out);
        for s in 0..batch {
            let o = &mut out[s * l_out * c_out..(s + 1) * l_out * c_out];
            for row in o.chunks_exact_mut(c_out) {
                row.copy_from_slice(bv);
            }
            let cols = im2col(&xv[s * lc..(s + 1) * lc], l_out, kc, in_channels);
            gemm(1.0, cols, View::dense(wv, kc, c_out), 1.0, o);
        }
        let op = Op::Conv1d { x: x.0, w: w.0, b: b.0, in_channels, length };
        Ok(self.push(batch, l_out * c_out, out, &[x.0, w.0, b.0], op))
    }

    /// Class-weighted mean cross-entropy of `softmax(logits)` over the masked
    /// rows: `sum_i w[y_i] * -log p_i[y_i] / sum_i w[y_i]`.
    pub fn weighted_cross_entropy(&mut self, logits: Var, targets: &LossTargets) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if targets.targets.len() != n || targets.mask.len() != n || targets.class_weights.len() != c {
            return Err(Error::ShapeMismatch {
                op: "weighted_cross_entropy",
                left: (n, c),
                right: (targets.targets.len(), targets.class_weights.len()),
            });
        }
        if targets.targets.iter().zip(targets.mask.iter()).any(|(&y, &m)| m && y >= c) {
            return Err(Error::Validation("target class out of range".into()));
        }
        let lv = self.val(logits.0);
        let mut probs = self.zeroed(n * c);
        let (mut loss, mut norm) = (0.0, 0.0);
        for i in 0..n {
            if !targets.mask[i] {
                continue;
            }
            let row = &mut probs[i * c..(i + 1) * c];
            row.copy_from_slice(&lv[i * c..(i + 1) * c]);
            softmax_in_place(row);
            let y = targets.targets[i];
            let w = targets.class_weights[y];
            // log p_y computed from the logits for accuracy
            let max = lv[i * c..(i + 1) * c].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + crate::math::ln(lv[i * c..(i + 1) * c].iter().map(|&z| crate::math::exp(z - max)).sum::<f64>());
            loss += w * (lse - lv[i * c + y]);
            norm += w;
        }
        if norm <= 0.0 {
            return Err(Error::Empty("loss mask"));
        }
        let op = Op::WeightedCe { logits: logits.0, targets: targets.clone(), probs, norm };
        Ok(self.push(1, 1, vec![loss / norm], &[logits.0], op))
    }

    fn accumulate(&mut self, i: usize, contribution: Vec<f64>) {
        let node = &mut self.nodes[i];
        if !node.needs_grad {
            return;
        }
        if node.grad.is_empty() {
            node.grad = contribution;
        } else {
            node.grad.iter_mut().zip(&contribution).for_each(|(g, c)| *g += c);
            self.recycle(contribution);
        }
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    /// Reverse pass from the `1x1` node `output`. Gradients from an earlier
    /// call are discarded.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if self.shape(output) != (1, 1) {
            return Err(Error::ShapeMismatch { op: "backward", left: self.shape(output), right: (1, 1) });
        }
        for i in 0..self.nodes.len() {
            let g = core::mem::take(&mut self.nodes[i].grad);
            self.recycle(g);
        }
        self.nodes[output.0].grad = vec![1.0];
        for i in (0..=output.0).rev() {
            if self.nodes[i].grad.is_empty() || !self.nodes[i].needs_grad {
                continue;
            }
            let g = core::mem::take(&mut self.nodes[i].grad);
            let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.backward_op(i, &op, &g);
            self.nodes[i].grad = g;
            self.nodes[i].op = op;
        }
        Ok(())
    }

    fn backward_op(&mut self, i: usize, op: &Op, g: &[f64]) {
        let (rows, cols) = self.dims(i);
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ((m, k), n) = (self.dims(a), cols);
                if self.wants(a) {
                    let mut da = self.zeroed(m * k);
                    gemm(1.0, View::dense(g, m, n), View::dense(self.val(b), k, n).t(), 0.0, &mut da);
                    self.accumulate(a, da);
                }
                if self.wants(b) {
                    let mut db = self.zeroed(k * n);
                    gemm(1.0, View::dense(self.val(a), m, k).t(), View::dense(g, m, n), 0.0, &mut db);
                    self.accumulate(b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, self.buf_from(g.iter().copied()));
                self.accumulate(b, self.buf_from(g.iter().copied()));
            }
            Op::Mul(a, b) => {
                if self.wants(a) {
                    let da = self.buf_from(g.iter().zip(self.val(b)).map(|(g, y)| g * y));
                    self.accumulate(a, da);
                }
                if self.wants(b) {
                    let db = self.buf_from(g.iter().zip(self.val(a)).map(|(g, x)| g * x));
                    self.accumulate(b, db);
                }
            }
            Op::Scale(a, s) => self.accumulate(a, self.buf_from(g.iter().map(|g| g * s))),
            Op::AddRow(a, bias) => {
                self.accumulate(a, self.buf_from(g.iter().copied()));
                if self.wants(bias) {
                    let mut db = self.zeroed(cols);
                    for row in g.chunks_exact(cols.max(1)) {
                        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                    }
                    self.accumulate(bias, db);
                }
            }
            Op::Elu(a) => {
                let y = &self.nodes[i].value;
                let d = self.buf_from(g.iter().zip(y).map(|(g, &y)| if y > 0.0 { *g } else { g * (y + 1.0) }));
                self.accumulate(a, d);
            }
            Op::Relu(a) => {
                let x = self.val(a);
                let d = self.buf_from(g.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { 0.0 }));
                self.accumulate(a, d);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.val(a);
                let d = self.buf_from(g.iter().zip(x).map(|(g, &x)| if x > 0.0 { *g } else { g * slope }));
                self.accumulate(a, d);
            }
            Op::Sum(a) => {
                let len = self.val(a).len();
                self.accumulate(a, self.buf_from(core::iter::repeat_n(g[0], len)));
            }
            Op::HeadDot { x, att, heads } => {
                let (n, hf) = self.dims(x);
                let f = hf / heads;
                if self.wants(x) {
                    let av = self.val(att);
                    let mut dx = self.zeroed(n * hf);
                    for r in 0..n {
                        for h in 0..heads {
                            let gv = g[r * heads + h];
                            for j in 0..f {
                                dx[r * hf + h * f + j] = gv * av[h * f + j];
                            }
                        }
                    }
                    self.accumulate(x, dx);
                }
                if self.wants(att) {
                    let xv = self.val(x);
                    let mut da = self.zeroed(hf);
                    for r in 0..n {
                        for h in 0..heads {
                            axpy(g[r * heads + h], &xv[r * hf + h * f..r * hf + (h + 1) * f], &mut da[h * f..(h + 1) * f]);
                        }
                    }
                    self.accumulate(att, da);
                }
            }
            Op::Gather { x, ref index } => {
                let (n, c) = self.dims(x);
                let mut dx = self.zeroed(n * c);
                for (e, &r) in index.iter().enumerate() {
                    dx[r * c..(r + 1) * c].iter_mut().zip(&g[e * c..(e + 1) * c]).for_each(|(d, g)| *d += g);
                }
                self.accumulate(x, dx);
            }
            Op::SegmentSoftmax { x, ref segments } => {
                let y = &self.nodes[i].value;
                let num_segments = segments.iter().max().map_or(0, |&m| m + 1);
                let mut dot = self.zeroed(num_segments * cols);
                for (r, &s) in segments.iter().enumerate() {
                    for j in 0..cols {
                        dot[s * cols + j] += y[r * cols + j] * g[r * cols + j];
                    }
                }
                let mut dx = self.zeroed(rows * cols);
                for (r, &s) in segments.iter().enumerate() {
                    for j in 0..cols {
                        let k = r * cols + j;
                        dx[k] = y[k] * (g[k] - dot[s * cols + j]);
                    }
                }
                self.recycle(dot);
                self.accumulate(x, dx);
            }
            Op::EdgeAggregate { alpha, x, ref edges } => {
                let heads = self.dims(alpha).1;
                let hf = cols;
                let f = hf / heads;
                if self.wants(alpha) {
                    let xv = self.val(x);
                    let mut da = self.zeroed(edges.len() * heads);
                    for (k, dk) in da.chunks_exact_mut(heads).enumerate() {
                        let (s, d) = (edges.src[k], edges.dst[k]);
                        let xs = &xv[s * hf..(s + 1) * hf];
                        let gs = &g[d * hf..(d + 1) * hf];
                        for ((x, gh), out) in xs.chunks_exact(f).zip(gs.chunks_exact(f)).zip(dk) {
                            *out = dot(x, gh);
                        }
                    }
                    self.accumulate(alpha, da);
                }
                if self.wants(x) {
                    let av = self.val(alpha);
                    let mut dx = self.zeroed(rows * hf);
                    for k in 0..edges.len() {
                        let (s, d) = (edges.src[k], edges.dst[k]);
                        let gs = &g[d * hf..(d + 1) * hf];
                        let xs = &mut dx[s * hf..(s + 1) * hf];
                        for ((o, gh), &a) in xs.chunks_exact_mut(f).zip(gs.chunks_exact(f)).zip(&av[k * heads..(k + 1) * heads]) {
                            axpy(a, gh, o);
                        }
                    }
                    self.accumulate(x, dx);
                }
            }
            Op::HeadMean { x, heads } => {
                let (n, hf) = self.dims(x);
                let f = hf / heads;
                let mut dx = self.zeroed(n * hf);
                for r in 0..n {
                    for h in 0..heads {
                        for j in 0..f {
                            dx[r * hf + h * f + j] = g[r * f + j] / heads as f64;
                        }
                    }
                }
                self.accumulate(x, dx);
            }
            Op::Conv1d { x, w, b, in_channels, length } => {
                let (kc, c_out) = self.dims(w);
                let l_out = cols / c_out;
                let lc = length * in_channels;
                let batch = rows;
                if self.wants(b) {
                    let mut db = self.zeroed(c_out);
                    for row in g.chunks_exact(c_out) {
                        db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                    }
                    self.accumulate(b, db);
                }
                if self.wants(w) {
                    let xv = self.val(x);
                    let mut dw = self.zeroed(kc * c_out);
                    for s in 0..batch {
                        let cols_view = im2col(&xv[s * lc..(s + 1) * lc], l_out, kc, in_channels);
                        let gs = &g[s * l_out * c_out..(s + 1) * l_out * c_out];
                        gemm(1.0, cols_view.t(), View::dense(gs, l_out, c_out), 1.0, &mut dw);
                    }
                    self.accumulate(w, dw);
                }
                if self.wants(x) {
                    let wv = self.val(w);
                    let mut dx = self.zeroed(batch * lc);
                    let mut dcols = self.zeroed(l_out * kc);
                    for s in 0..batch {
                        let gs = &g[s * l_out * c_out..(s + 1) * l_out * c_out];
                        gemm(1.0, View::dense(gs, l_out, c_out), View::dense(wv, kc, c_out).t(), 0.0, &mut dcols);
                        let dxs = &mut dx[s * lc..(s + 1) * lc];
                        for t in 0..l_out {
                            let src = &dcols[t * kc..(t + 1) * kc];
                            dxs[t * in_channels..t * in_channels + kc]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, v)| *d += v);
                        }
                    }
                    self.recycle(dcols);
                    self.accumulate(x, dx);
                }
            }
            Op::WeightedCe { logits, ref targets, ref probs, norm } => {
                let (n, c) = self.dims(logits);
                let mut dl = self.zeroed(n * c);
                for r in 0..n {
                    if !targets.mask[r] {
                        continue;
                    }
                    let y = targets.targets[r];
                    let scale = g[0] * targets.class_weights[y] / norm;
                    for j in 0..c {
                        let onehot = if j == y { 1.0 } else { 0.0 };
                        dl[r * c + j] = scale * (probs[r * c + j] - onehot);
                    }
                }
                self.accumulate(logits, dl);
            }
        }
    }
}

/// Overlapping-row view of one time-major sample: row `t` covers the
/// `k*C_in` values starting at time `t`.
fn im2col(sample: &[f64], l_out: usize, kc: usize, in_channels: usize) -> View<'_> {
    View { data: sample, rows: l_out, cols: kc, row_stride: in_channels, col_stride: 1 }
}
