//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its forward value and enough
//! context to run its backward rule. Nodes are appended in creation order, so
//! the tape is already topologically sorted and [`Tape::backward`] is a single
//! reverse sweep.

use std::sync::Arc;

use super::{Activation, EdgeSegments, Matrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Act(Var, Activation),
    Dropout(Var, Matrix),
    EdgeScores {
        h: Var,
        a: Var,
        seg: Arc<EdgeSegments>,
    },
    SegmentSoftmax(Var, Arc<EdgeSegments>),
    SegmentWeightedSum {
        alpha: Var,
        messages: Var,
        seg: Arc<EdgeSegments>,
    },
    NeighborAggregate {
        alpha: Var,
        x: Var,
        seg: Arc<EdgeSegments>,
    },
    ConcatCols(Vec<Var>),
    Mean(Vec<Var>),
    CrossEntropy {
        logits: Var,
        /// Softmax probabilities of the selected rows.
        probs: Matrix,
        rows: Vec<usize>,
        labels: Vec<usize>,
    },
    Sum(Var),
    SumSquares(Var),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every leaf that requires them.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros of `shape` when nothing flowed into it.
    pub fn get_or_zeros(&self, var: Var, shape: (usize, usize)) -> Matrix {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

fn expect_shape(op: &'static str, cond: bool, detail: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::shape(op, detail()))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// `x · w`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        expect_shape("matmul", xs.1 == ws.0, || format!("{xs:?} x {ws:?}"))?;
        let value = self.value(x).matmul(self.value(w));
        Ok(self.push(value, Op::MatMul(x, w), &[x, w]))
    }

    /// `x + b` with the 1×d row `b` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(b));
        expect_shape("add_bias", bs == (1, xs.1), || format!("{xs:?} + {bs:?}"))?;
        let mut value = self.value(x).clone();
        let bias = self.value(b).row(0).to_vec();
        for i in 0..xs.0 {
            for (o, bv) in value.row_mut(i).iter_mut().zip(&bias) {
                *o += bv;
            }
        }
        Ok(self.push(value, Op::AddBias(x, b), &[x, b]))
    }

    /// `x · w (+ b)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (s1, s2) = (self.shape(a), self.shape(b));
        expect_shape("add", s1 == s2, || format!("{s1:?} + {s2:?}"))?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let value = self.value(x).scale(s);
        self.push(value, Op::Scale(x, s), &[x])
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Identity {
            return x;
        }
        let value = self.value(x).map(|v| kind.apply(v));
        self.push(value, Op::Act(x, kind), &[x])
    }

    /// Multiplies by a precomputed mask (entries 0 or `1/(1-p)`).
    pub fn dropout(&mut self, x: Var, mask: Matrix) -> Result<Var> {
        let xs = self.shape(x);
        expect_shape("dropout", mask.shape() == xs, || {
            format!("mask {:?} vs {xs:?}", mask.shape())
        })?;
        let value = self.value(x).zip_map(&mask, |a, m| a * m);
        Ok(self.push(value, Op::Dropout(x, mask), &[x]))
    }

    /// Per-edge attention logits `a[..d]·h[dst] + a[d..]·h[src]`, with `a` a
    /// `2d × 1` column.
    pub fn edge_scores(&mut self, h: Var, a: Var, seg: &Arc<EdgeSegments>) -> Result<Var> {
        let (hs, as_) = (self.shape(h), self.shape(a));
        expect_shape("edge_scores", as_ == (2 * hs.1, 1), || format!("h {hs:?}, a {as_:?}"))?;
        expect_shape("edge_scores", hs.0 == seg.num_nodes(), || {
            format!("{} rows for {} nodes", hs.0, seg.num_nodes())
        })?;
        let (s_dst, s_src) = self.half_projections(h, a);
        let values: Vec<f64> = seg
            .dst()
            .iter()
            .zip(seg.src())
            .map(|(&i, &j)| s_dst[i] + s_src[j])
            .collect();
        let value = Matrix::column(&values);
        Ok(self.push(value, Op::EdgeScores { h, a, seg: seg.clone() }, &[h, a]))
    }

    fn half_projections(&self, h: Var, a: Var) -> (Vec<f64>, Vec<f64>) {
        let hv = self.value(h);
        let av = self.value(a).as_slice();
        let d = hv.cols();
        let (a1, a2) = av.split_at(d);
        let mut s_dst = Vec::with_capacity(hv.rows());
        let mut s_src = Vec::with_capacity(hv.rows());
        for i in 0..hv.rows() {
            let r = hv.row(i);
            s_dst.push(dot(r, a1));
            s_src.push(dot(r, a2));
        }
        (s_dst, s_src)
    }

    /// Softmax within each destination segment, with max subtraction.
    pub fn segment_softmax(&mut self, scores: Var, seg: &Arc<EdgeSegments>) -> Result<Var> {
        let ss = self.shape(scores);
        expect_shape("segment_softmax", ss == (seg.num_edges(), 1), || {
            format!("{ss:?} for {} edges", seg.num_edges())
        })?;
        if let Some(node) = seg.first_empty() {
            return Err(Error::EmptySegment(node));
        }
        let s = self.value(scores).as_slice();
        let mut out = vec![0.0; s.len()];
        for i in 0..seg.num_nodes() {
            let r = seg.range(i);
            let m = s[r.clone()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in r.clone() {
                let e = (s[k] - m).exp();
                out[k] = e;
                z += e;
            }
            for o in &mut out[r] {
                *o /= z;
            }
        }
        Ok(self.push(Matrix::column(&out), Op::SegmentSoftmax(scores, seg.clone()), &[scores]))
    }

    /// Row `i` of the result is `Σ_{k ∈ segment(i)} alpha[k] · messages[k]`.
    pub fn segment_weighted_sum(&mut self, alpha: Var, messages: Var, seg: &Arc<EdgeSegments>) -> Result<Var> {
        let (als, ms) = (self.shape(alpha), self.shape(messages));
        expect_shape(
            "segment_weighted_sum",
            als == (seg.num_edges(), 1) && ms.0 == seg.num_edges(),
            || format!("alpha {als:?}, messages {ms:?}, {} edges", seg.num_edges()),
        )?;
        let av = self.value(alpha).as_slice();
        let mv = self.value(messages);
        let mut out = Matrix::zeros(seg.num_nodes(), ms.1);
        for i in 0..seg.num_nodes() {
            let row = out.row_mut(i);
            for k in seg.range(i) {
                axpy(av[k], mv.row(k), row);
            }
        }
        Ok(self.push(
            out,
            Op::SegmentWeightedSum {
                alpha,
                messages,
                seg: seg.clone(),
            },
            &[alpha, messages],
        ))
    }

    /// Same as `segment_weighted_sum` with `messages[k] = x[src[k]]`, without
    /// materializing the gathered rows.
    pub fn neighbor_aggregate(&mut self, alpha: Var, x: Var, seg: &Arc<EdgeSegments>) -> Result<Var> {
        let (als, xs) = (self.shape(alpha), self.shape(x));
        expect_shape(
            "neighbor_aggregate",
            als == (seg.num_edges(), 1) && xs.0 == seg.num_nodes(),
            || format!("alpha {als:?}, x {xs:?}"),
        )?;
        let av = self.value(alpha).as_slice();
        let xv = self.value(x);
        let src = seg.src();
        let mut out = Matrix::zeros(xs.0, xs.1);
        for i in 0..seg.num_nodes() {
            let row = out.row_mut(i);
            for k in seg.range(i) {
                axpy(av[k], xv.row(src[k]), row);
            }
        }
        Ok(self.push(
            out,
            Op::NeighborAggregate {
                alpha,
                x,
                seg: seg.clone(),
            },
            &[alpha, x],
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let rows = self.shape(parts[0]).0;
        expect_shape("concat_cols", parts.iter().all(|&p| self.shape(p).0 == rows), || {
            "row counts differ".into()
        })?;
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hconcat(&mats);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Elementwise mean of same-shaped inputs.
    pub fn mean(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let shape = self.shape(parts[0]);
        expect_shape("mean", parts.iter().all(|&p| self.shape(p) == shape), || {
            "shapes differ".into()
        })?;
        let mut value = Matrix::zeros(shape.0, shape.1);
        for &p in parts {
            value.add_assign(self.value(p));
        }
        let value = value.scale(1.0 / parts.len() as f64);
        Ok(self.push(value, Op::Mean(parts.to_vec()), parts))
    }

    /// Mean softmax cross-entropy over the rows where `mask` is set.
    pub fn masked_cross_entropy(&mut self, logits: Var, labels: &[usize], mask: &[bool]) -> Result<Var> {
        let (n, c) = self.shape(logits);
        expect_shape("masked_cross_entropy", labels.len() == n && mask.len() == n, || {
            format!("{n} rows, {} labels, {} mask entries", labels.len(), mask.len())
        })?;
        let rows: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        if rows.is_empty() {
            return Err(Error::EmptyMask);
        }
        let lv = self.value(logits);
        let mut probs = Matrix::zeros(rows.len(), c);
        let mut picked = Vec::with_capacity(rows.len());
        let mut total = 0.0;
        for (r, &i) in rows.iter().enumerate() {
            let z = lv.row(i);
            let y = labels[i];
            expect_shape("masked_cross_entropy", y < c, || format!("label {y} with {c} classes"))?;
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|&v| (v - m).exp()).sum();
            let lse = m + sum.ln();
            total += lse - z[y];
            for (p, &v) in probs.row_mut(r).iter_mut().zip(z) {
                *p = (v - lse).exp();
            }
            picked.push(y);
        }
        let value = Matrix::filled(1, 1, total / rows.len() as f64);
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                probs,
                rows,
                labels: picked,
            },
            &[logits],
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(x).sum());
        self.push(value, Op::Sum(x), &[x])
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).as_slice().iter().map(|v| v * v).sum();
        self.push(Matrix::filled(1, 1, s), Op::SumSquares(x), &[x])
    }

    /// Runs the reverse sweep from a 1×1 `loss`, consuming the tape.
    pub fn backward(mut self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        let mut grads: Vec<Option<Matrix>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
            self.backward_op(idx, op, g, &mut grads);
        }
        // Only leaves keep their gradients.
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn backward_op(&self, idx: usize, op: Op, g: Matrix, grads: &mut [Option<Matrix>]) {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, delta: Matrix| {
            let slot = &mut grads[v.0];
            match slot {
                Some(existing) => existing.add_assign(&delta),
                None => *slot = Some(delta),
            }
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(x, w) => {
                if needs(x) {
                    acc(x, g.matmul_t(self.value(w)));
                }
                if needs(w) {
                    acc(w, self.value(x).t_matmul(&g));
                }
            }
            Op::AddBias(x, b) => {
                if needs(b) {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gb.row_mut(0).iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    acc(b, gb);
                }
                if needs(x) {
                    acc(x, g);
                }
            }
            Op::Add(a, b) => {
                if needs(a) && needs(b) {
                    acc(a, g.clone());
                    acc(b, g);
                } else if needs(a) {
                    acc(a, g);
                } else if needs(b) {
                    acc(b, g);
                }
            }
            Op::Scale(x, s) => acc(x, g.scale(s)),
            Op::Act(x, kind) => {
                let xv = self.value(x);
                let yv = &self.nodes[idx].value;
                let mut gx = g;
                for ((o, &xi), &yi) in gx.as_mut_slice().iter_mut().zip(xv.as_slice()).zip(yv.as_slice()) {
                    *o *= kind.derivative(xi, yi);
                }
                acc(x, gx);
            }
            Op::Dropout(x, mask) => acc(x, g.zip_map(&mask, |a, m| a * m)),
            Op::EdgeScores { h, a, seg } => {
                let hv = self.value(h);
                let av = self.value(a).as_slice();
                let d = hv.cols();
                let n = hv.rows();
                let ge = g.as_slice();
                let mut g_dst = vec![0.0; n];
                let mut g_src = vec![0.0; n];
                for (k, (&i, &j)) in seg.dst().iter().zip(seg.src()).enumerate() {
                    g_dst[i] += ge[k];
                    g_src[j] += ge[k];
                }
                if needs(h) {
                    let (a1, a2) = av.split_at(d);
                    let mut gh = Matrix::zeros(n, d);
                    for i in 0..n {
                        let row = gh.row_mut(i);
                        axpy(g_dst[i], a1, row);
                        axpy(g_src[i], a2, row);
                    }
                    acc(h, gh);
                }
                if needs(a) {
                    let mut ga = Matrix::zeros(2 * d, 1);
                    {
                        let (ga1, ga2) = ga.as_mut_slice().split_at_mut(d);
                        for i in 0..n {
                            axpy(g_dst[i], hv.row(i), ga1);
                            axpy(g_src[i], hv.row(i), ga2);
                        }
                    }
                    acc(a, ga);
                }
            }
            Op::SegmentSoftmax(x, seg) => {
                let y = self.nodes[idx].value.as_slice();
                let gy = g.as_slice();
                let mut gx = vec![0.0; y.len()];
                for i in 0..seg.num_nodes() {
                    let r = seg.range(i);
                    let dotp: f64 = r.clone().map(|k| y[k] * gy[k]).sum();
                    for k in r {
                        gx[k] = y[k] * (gy[k] - dotp);
                    }
                }
                acc(x, Matrix::column(&gx));
            }
            Op::SegmentWeightedSum { alpha, messages, seg } => {
                let av = self.value(alpha).as_slice();
                let mv = self.value(messages);
                if needs(alpha) {
                    let mut ga = vec![0.0; av.len()];
                    for i in 0..seg.num_nodes() {
                        for k in seg.range(i) {
                            ga[k] = dot(g.row(i), mv.row(k));
                        }
                    }
                    acc(alpha, Matrix::column(&ga));
                }
                if needs(messages) {
                    let mut gm = Matrix::zeros(mv.rows(), mv.cols());
                    for i in 0..seg.num_nodes() {
                        for k in seg.range(i) {
                            axpy(av[k], g.row(i), gm.row_mut(k));
                        }
                    }
                    acc(messages, gm);
                }
            }
            Op::NeighborAggregate { alpha, x, seg } => {
                let av = self.value(alpha).as_slice();
                let xv = self.value(x);
                let src = seg.src();
                if needs(alpha) {
                    let mut ga = vec![0.0; av.len()];
                    for i in 0..seg.num_nodes() {
                        for k in seg.range(i) {
                            ga[k] = dot(g.row(i), xv.row(src[k]));
                        }
                    }
                    acc(alpha, Matrix::column(&ga));
                }
                if needs(x) {
                    let mut gx = Matrix::zeros(xv.rows(), xv.cols());
                    for i in 0..seg.num_nodes() {
                        for k in seg.range(i) {
                            axpy(av[k], g.row(i), gx.row_mut(src[k]));
                        }
                    }
                    acc(x, gx);
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = self.shape(p).1;
                    if needs(p) {
                        acc(p, g.slice_cols(offset, offset + w));
                    }
                    offset += w;
                }
            }
            Op::Mean(parts) => {
                let share = g.scale(1.0 / parts.len() as f64);
                for p in parts {
                    if needs(p) {
                        acc(p, share.clone());
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                probs,
                rows,
                labels,
            } => {
                let (n, c) = self.shape(logits);
                let scale = g.get(0, 0) / rows.len() as f64;
                let mut gl = Matrix::zeros(n, c);
                for (r, (&i, &y)) in rows.iter().zip(&labels).enumerate() {
                    let out = gl.row_mut(i);
                    for (o, &p) in out.iter_mut().zip(probs.row(r)) {
                        *o = p * scale;
                    }
                    out[y] -= scale;
                }
                acc(logits, gl);
            }
            Op::Sum(x) => {
                let (r, c) = self.shape(x);
                acc(x, Matrix::filled(r, c, g.get(0, 0)));
            }
            Op::SumSquares(x) => acc(x, self.value(x).scale(2.0 * g.get(0, 0))),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}
