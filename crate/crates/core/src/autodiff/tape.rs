//! Operation recording and the reverse pass.
//!
//! Every primitive computes its value eagerly and appends one node to the
//! tape. `backward` walks the nodes in exact reverse order and pushes
//! adjoints to inputs; parameter leaves flush their adjoint into the owning
//! [`ParamSet`].

use crate::error::{Error, Result};
use crate::tensor::{ParamId, ParamSet, Tensor};

/// Probability clamp shared by the binary losses.
pub const PROB_EPS: f64 = 1e-7;

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Per-channel statistics for one group of rows in a standardization.
#[derive(Clone, Debug)]
pub(crate) struct Segment {
    /// Rows the statistics were computed from. `None` means the statistics
    /// are constants (running statistics) and receive no gradient.
    pub stats_rows: Option<Vec<usize>>,
    /// Rows normalized with these statistics.
    pub apply_rows: Vec<usize>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    SelectRows {
        x: Var,
        rows: Vec<usize>,
    },
    Reshape(Var),
    Sum(Var),
    Scale(Var, f64),
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: Tensor,
    },
    Bce {
        p: Var,
        targets: Vec<f64>,
        active: Vec<bool>,
    },
    Confusion {
        p: Var,
        active: Vec<bool>,
    },
    Standardize {
        x: Var,
        affine: Option<(Var, Var)>,
        segments: Vec<Segment>,
        inv_std: Vec<Vec<f64>>,
        xhat: Tensor,
        scale: Option<Tensor>,
    },
    GroupNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Linear record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Drops every record; the tape can be reused for a fresh forward pass.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a parameter; its gradient is accumulated on `backward`.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.get(id).value.clone(), Op::Param(id))
    }

    /// Copies a value into a new constant leaf, cutting the gradient path.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.leaf(value)
    }

    /// `y = x·w + b` for `x: B×I`, `w: I×O`, `b: O`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.shape().len() != 2 || wv.shape().len() != 2 || xv.shape()[1] != wv.shape()[0] {
            return Err(shape_err("linear", xv, wv));
        }
        let (rows, inner, out) = (xv.shape()[0], wv.shape()[0], wv.shape()[1]);
        if bv.len() != out {
            return Err(shape_err("linear bias", wv, bv));
        }
        let (xd, wd, bd) = (xv.data(), wv.data(), bv.data());
        let mut y = vec![0.0; rows * out];
        for r in 0..rows {
            let yr = &mut y[r * out..(r + 1) * out];
            yr.copy_from_slice(bd);
            for k in 0..inner {
                let a = xd[r * inner + k];
                if a == 0.0 {
                    continue;
                }
                let wk = &wd[k * out..(k + 1) * out];
                for (yo, wo) in yr.iter_mut().zip(wk) {
                    *yo += a * wo;
                }
            }
        }
        let value = Tensor::new(vec![rows, out], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let mut value = self.value(x).clone();
        value.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        self.push(value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let mut value = self.value(x).clone();
        value.data_mut().iter_mut().for_each(|v| *v = sigmoid(*v));
        self.push(value, Op::Sigmoid(x))
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= xv.rows()) {
            return Err(Error::Shape {
                op: "select_rows",
                left: xv.shape().to_vec(),
                right: vec![bad],
            });
        }
        let value = xv.select_rows(rows);
        Ok(self.push(
            value,
            Op::SelectRows {
                x,
                rows: rows.to_vec(),
            },
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = Tensor::new(shape.to_vec(), self.value(x).data().to_vec())?;
        Ok(self.push(value, Op::Reshape(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let mut value = self.value(x).clone();
        value.data_mut().iter_mut().for_each(|v| *v *= k);
        self.push(value, Op::Scale(x, k))
    }

    /// Mean softmax cross-entropy of `logits: B×C` against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape().len() != 2 || lv.rows() != labels.len() {
            return Err(Error::Shape {
                op: "softmax_cross_entropy",
                left: lv.shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if labels.is_empty() {
            return Err(Error::Empty("softmax_cross_entropy batch".into()));
        }
        let classes = lv.cols();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let probs = softmax_rows(lv);
        let mut loss = 0.0;
        for (r, &l) in labels.iter().enumerate() {
            let row = lv.row(r);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            loss += lse - row[l];
        }
        loss /= labels.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Mean binary cross-entropy; `p` is clamped to `[ε, 1−ε]`.
    pub fn binary_cross_entropy(&mut self, p: Var, targets: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != targets.len() {
            return Err(Error::Shape {
                op: "binary_cross_entropy",
                left: pv.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        if targets.is_empty() {
            return Err(Error::Empty("binary_cross_entropy batch".into()));
        }
        let mut active = Vec::with_capacity(targets.len());
        let mut loss = 0.0;
        for (&raw, &t) in pv.data().iter().zip(targets) {
            let q = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
            active.push(q == raw);
            loss -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
        }
        loss /= targets.len() as f64;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Bce {
                p,
                targets: targets.to_vec(),
                active,
            },
        ))
    }

    /// `−Σ log(1 − p)` over all entries of `p` (a sum, not a mean).
    pub fn confusion_loss(&mut self, p: Var) -> Var {
        let pv = self.value(p);
        let mut active = Vec::with_capacity(pv.len());
        let mut loss = 0.0;
        for &raw in pv.data() {
            let q = raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
            active.push(q == raw);
            loss -= (1.0 - q).ln();
        }
        self.push(Tensor::scalar(loss), Op::Confusion { p, active })
    }

    /// Column standardization of `x: B×C` by per-segment statistics,
    /// followed by an optional per-channel affine map and an optional
    /// constant elementwise scale: `y = scale ⊙ (γ·x̂ + β)`.
    pub(crate) fn standardize(
        &mut self,
        x: Var,
        affine: Option<(Var, Var)>,
        segments: Vec<Segment>,
        eps: f64,
        scale: Option<Tensor>,
    ) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return Err(shape_err("standardize", xv, xv));
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        if let Some((g, b)) = affine {
            let (gv, bv) = (self.value(g), self.value(b));
            if gv.len() != cols || bv.len() != cols {
                return Err(shape_err("standardize affine", xv, gv));
            }
        }
        if let Some(s) = &scale {
            if s.shape() != xv.shape() {
                return Err(shape_err("standardize scale", xv, s));
            }
        }
        let xd = xv.data();
        let mut xhat = vec![0.0; rows * cols];
        let mut inv_std = Vec::with_capacity(segments.len());
        for seg in &segments {
            let is: Vec<f64> = seg.var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            for &r in &seg.apply_rows {
                for c in 0..cols {
                    xhat[r * cols + c] = (xd[r * cols + c] - seg.mean[c]) * is[c];
                }
            }
            inv_std.push(is);
        }
        let mut y = xhat.clone();
        if let Some((g, b)) = affine {
            let (gd, bd) = (self.value(g).data(), self.value(b).data());
            for r in 0..rows {
                for c in 0..cols {
                    y[r * cols + c] = gd[c] * xhat[r * cols + c] + bd[c];
                }
            }
        }
        if let Some(s) = &scale {
            for (v, k) in y.iter_mut().zip(s.data()) {
                *v *= k;
            }
        }
        let shape = vec![rows, cols];
        let value = Tensor::new(shape.clone(), y)?;
        let xhat = Tensor::new(shape, xhat)?;
        Ok(self.push(
            value,
            Op::Standardize {
                x,
                affine,
                segments,
                inv_std,
                xhat,
                scale,
            },
        ))
    }

    /// Per-row normalization over `groups` contiguous channel groups.
    pub(crate) fn group_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        groups: usize,
        eps: f64,
    ) -> Result<Var> {
        let xv = self.value(x);
        let (rows, cols) = (xv.rows(), xv.cols());
        if groups == 0 || cols % groups != 0 {
            return Err(Error::config(format!(
                "groups={groups} does not divide channel count {cols}"
            )));
        }
        let (gv, bv) = (self.value(gamma), self.value(beta));
        if gv.len() != cols || bv.len() != cols {
            return Err(shape_err("group_norm affine", xv, gv));
        }
        let width = cols / groups;
        let xd = xv.data();
        let mut xhat = vec![0.0; rows * cols];
        let mut inv_std = Vec::with_capacity(rows * groups);
        for r in 0..rows {
            for g in 0..groups {
                let span = r * cols + g * width..r * cols + (g + 1) * width;
                let vals = &xd[span.clone()];
                let mean = vals.iter().sum::<f64>() / width as f64;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
                let is = 1.0 / (var + eps).sqrt();
                for (h, v) in xhat[span].iter_mut().zip(vals) {
                    *h = (v - mean) * is;
                }
                inv_std.push(is);
            }
        }
        let (gd, bd) = (gv.data(), bv.data());
        let y = xhat
            .iter()
            .enumerate()
            .map(|(i, h)| gd[i % cols] * h + bd[i % cols])
            .collect();
        let shape = vec![rows, cols];
        let value = Tensor::new(shape.clone(), y)?;
        let xhat = Tensor::new(shape, xhat)?;
        Ok(self.push(
            value,
            Op::GroupNorm {
                x,
                gamma,
                beta,
                groups,
                xhat,
                inv_std,
            },
        ))
    }

    /// Reverse pass from a one-element `loss` node. Parameter gradients are
    /// added to `params`; parameters not reachable from `loss` are untouched.
    pub fn backward(&mut self, loss: Var, params: &mut ParamSet) -> Result<()> {
        if self.consumed {
            return Err(Error::StaleTape);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                left: self.value(loss).shape().to_vec(),
                right: vec![1],
            });
        }
        self.consumed = true;
        let mut adj: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => params.get_mut(*id).grad.add_assign(&g),
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (rows, inner, out) = (xv.rows(), wv.rows(), wv.cols());
                    let (xd, wd, gd) = (xv.data(), wv.data(), g.data());
                    let mut dx = vec![0.0; rows * inner];
                    let mut dw = vec![0.0; inner * out];
                    let mut db = vec![0.0; out];
                    for r in 0..rows {
                        let gr = &gd[r * out..(r + 1) * out];
                        for (d, v) in db.iter_mut().zip(gr) {
                            *d += v;
                        }
                        for k in 0..inner {
                            let wk = &wd[k * out..(k + 1) * out];
                            dx[r * inner + k] = wk.iter().zip(gr).map(|(a, b)| a * b).sum();
                            let a = xd[r * inner + k];
                            if a != 0.0 {
                                for (d, v) in dw[k * out..(k + 1) * out].iter_mut().zip(gr) {
                                    *d += a * v;
                                }
                            }
                        }
                    }
                    let (x, w, b) = (*x, *w, *b);
                    accumulate(&mut adj, x, Tensor::new(vec![rows, inner], dx)?);
                    let wshape = self.value(w).shape().to_vec();
                    accumulate(&mut adj, w, Tensor::new(wshape, dw)?);
                    let bshape = self.value(b).shape().to_vec();
                    accumulate(&mut adj, b, Tensor::new(bshape, db)?);
                }
                Op::Relu(x) => {
                    let mut d = g;
                    for (dv, xv) in d.data_mut().iter_mut().zip(self.value(*x).data()) {
                        if *xv <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    accumulate(&mut adj, *x, d);
                }
                Op::Sigmoid(x) => {
                    let mut d = g;
                    for (dv, s) in d.data_mut().iter_mut().zip(node.value.data()) {
                        *dv *= s * (1.0 - s);
                    }
                    accumulate(&mut adj, *x, d);
                }
                Op::SelectRows { x, rows } => {
                    let xv = self.value(*x);
                    let cols = xv.cols();
                    let mut d = Tensor::zeros(xv.shape());
                    for (k, &r) in rows.iter().enumerate() {
                        for c in 0..cols {
                            d.data_mut()[r * cols + c] += g.data()[k * cols + c];
                        }
                    }
                    accumulate(&mut adj, *x, d);
                }
                Op::Reshape(x) => {
                    let shape = self.value(*x).shape().to_vec();
                    accumulate(&mut adj, *x, Tensor::new(shape, g.into_data())?);
                }
                Op::Sum(x) => {
                    let d = Tensor::full(self.value(*x).shape(), g.data()[0]);
                    accumulate(&mut adj, *x, d);
                }
                Op::Scale(x, k) => {
                    let mut d = g;
                    d.data_mut().iter_mut().for_each(|v| *v *= k);
                    accumulate(&mut adj, *x, d);
                }
                Op::SoftmaxCe {
                    logits,
                    labels,
                    probs,
                } => {
                    let up = g.data()[0] / labels.len() as f64;
                    let mut d = probs.clone();
                    let cols = d.cols();
                    for (r, &l) in labels.iter().enumerate() {
                        d.data_mut()[r * cols + l] -= 1.0;
                    }
                    d.data_mut().iter_mut().for_each(|v| *v *= up);
                    accumulate(&mut adj, *logits, d);
                }
                Op::Bce { p, targets, active } => {
                    let up = g.data()[0] / targets.len() as f64;
                    let pv = self.value(*p);
                    let mut d = Tensor::zeros(pv.shape());
                    for (k, (&q, &t)) in pv.data().iter().zip(targets).enumerate() {
                        if active[k] {
                            d.data_mut()[k] = up * (q - t) / (q * (1.0 - q));
                        }
                    }
                    accumulate(&mut adj, *p, d);
                }
                Op::Confusion { p, active } => {
                    let up = g.data()[0];
                    let pv = self.value(*p);
                    let mut d = Tensor::zeros(pv.shape());
                    for (k, &q) in pv.data().iter().enumerate() {
                        if active[k] {
                            d.data_mut()[k] = up / (1.0 - q);
                        }
                    }
                    accumulate(&mut adj, *p, d);
                }
                Op::Standardize {
                    x,
                    affine,
                    segments,
                    inv_std,
                    xhat,
                    scale,
                } => {
                    let xv = self.value(*x);
                    let (rows, cols) = (xv.rows(), xv.cols());
                    let xd = xv.data();
                    let mut dy = g;
                    if let Some(s) = scale {
                        for (v, k) in dy.data_mut().iter_mut().zip(s.data()) {
                            *v *= k;
                        }
                    }
                    let mut dxhat = dy.clone();
                    if let Some((gamma, beta)) = affine {
                        let gd = self.value(*gamma).data();
                        let mut dgamma = vec![0.0; cols];
                        let mut dbeta = vec![0.0; cols];
                        for r in 0..rows {
                            for c in 0..cols {
                                let i = r * cols + c;
                                dgamma[c] += dy.data()[i] * xhat.data()[i];
                                dbeta[c] += dy.data()[i];
                                dxhat.data_mut()[i] = dy.data()[i] * gd[c];
                            }
                        }
                        let (gamma, beta) = (*gamma, *beta);
                        let gshape = self.value(gamma).shape().to_vec();
                        let bshape = self.value(beta).shape().to_vec();
                        accumulate(&mut adj, gamma, Tensor::new(gshape, dgamma)?);
                        accumulate(&mut adj, beta, Tensor::new(bshape, dbeta)?);
                    }
                    let dh = dxhat.data();
                    let mut dx = vec![0.0; rows * cols];
                    for (seg, is) in segments.iter().zip(inv_std) {
                        for (c, &isc) in is.iter().enumerate().take(cols) {
                            let mut sum_d = 0.0;
                            let mut sum_dc = 0.0;
                            for &r in &seg.apply_rows {
                                let i = r * cols + c;
                                dx[i] += dh[i] * isc;
                                sum_d += dh[i];
                                sum_dc += dh[i] * (xd[i] - seg.mean[c]);
                            }
                            if let Some(stats_rows) = &seg.stats_rows {
                                let n = stats_rows.len() as f64;
                                let dmean = -isc * sum_d;
                                let dvar = -0.5 * isc.powi(3) * sum_dc;
                                for &r in stats_rows {
                                    let i = r * cols + c;
                                    dx[i] += dmean / n + dvar * 2.0 * (xd[i] - seg.mean[c]) / n;
                                }
                            }
                        }
                    }
                    let x = *x;
                    accumulate(&mut adj, x, Tensor::new(vec![rows, cols], dx)?);
                }
                Op::GroupNorm {
                    x,
                    gamma,
                    beta,
                    groups,
                    xhat,
                    inv_std,
                } => {
                    let (rows, cols) = (xhat.rows(), xhat.cols());
                    let width = cols / groups;
                    let gd = self.value(*gamma).data();
                    let (dyd, hd) = (g.data(), xhat.data());
                    let mut dgamma = vec![0.0; cols];
                    let mut dbeta = vec![0.0; cols];
                    let mut dx = vec![0.0; rows * cols];
                    for r in 0..rows {
                        for grp in 0..*groups {
                            let lo = r * cols + grp * width;
                            let mut mean_d = 0.0;
                            let mut mean_dh = 0.0;
                            for i in lo..lo + width {
                                let c = i - r * cols;
                                dgamma[c] += dyd[i] * hd[i];
                                dbeta[c] += dyd[i];
                                let d = dyd[i] * gd[c];
                                mean_d += d;
                                mean_dh += d * hd[i];
                            }
                            mean_d /= width as f64;
                            mean_dh /= width as f64;
                            let is = inv_std[r * groups + grp];
                            for i in lo..lo + width {
                                let c = i - r * cols;
                                let d = dyd[i] * gd[c];
                                dx[i] = is * (d - mean_d - hd[i] * mean_dh);
                            }
                        }
                    }
                    let (x, gamma, beta) = (*x, *gamma, *beta);
                    let gshape = self.value(gamma).shape().to_vec();
                    let bshape = self.value(beta).shape().to_vec();
                    accumulate(&mut adj, x, Tensor::new(vec![rows, cols], dx)?);
                    accumulate(&mut adj, gamma, Tensor::new(gshape, dgamma)?);
                    accumulate(&mut adj, beta, Tensor::new(bshape, dbeta)?);
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Tensor>], v: Var, d: Tensor) {
    match &mut adj[v.0] {
        Some(acc) => acc.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let cols = logits.cols();
    for row in out.data_mut().chunks_mut(cols.max(1)) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

/// Per-column mean and biased variance over the given rows of `x: B×C`.
pub(crate) fn column_stats(x: &Tensor, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let cols = x.cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; cols];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; cols];
    for &r in rows {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    var.iter_mut().for_each(|s| *s /= n);
    (mean, var)
}
