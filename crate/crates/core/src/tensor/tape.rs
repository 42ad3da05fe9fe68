//! Recording tape for reverse-mode differentiation.
//!
//! Every primitive appends a node holding its output value and the op
//! record (input handles plus whatever the backward rule needs). Nodes
//! only ever reference earlier nodes, so the vector order is already
//! topological; the backward sweep walks it once in reverse. A tape can
//! run backward once — a second call is rejected rather than silently
//! re-accumulating.

use super::{Result, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Reduction axis for 2-D tensors: `Rows` collapses the row dimension
/// (output has one entry per column), `Cols` collapses columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Leaf,
    Matmul { a: Var, b: Var },
    Transpose { x: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, c: f64 },
    AddRow { x: Var, row: Var },
    MulRow { x: Var, row: Var },
    Exp { x: Var },
    Log { x: Var },
    Silu { x: Var },
    SoftmaxRows { x: Var },
    LogSoftmaxRows { x: Var },
    LayerNormRows { x: Var, inv_std: Vec<f64>, mean: Vec<f64> },
    L2NormRows { x: Var, norms: Vec<f64> },
    SumAll { x: Var },
    MeanAll { x: Var },
    ReduceSum { x: Var, axis: Axis },
    ReduceMean { x: Var, axis: Axis },
    ReduceMax { x: Var, axis: Axis, argmax: Vec<usize> },
    GatherIndex { x: Var, idx: Vec<usize> },
    ConcatRows { xs: Vec<Var> },
    SliceRows { x: Var, start: usize },
    Reshape { x: Var },
    Conv2d { x: Var, w: Var, b: Var },
    Upsample2d { x: Var },
    AvgPool2d { x: Var, factor: usize },
}

pub(crate) struct Node {
    pub value: Tensor,
    pub grad: Option<Tensor>,
    pub needs_grad: bool,
    pub op: Op,
}

/// Wengert tape. Confined to one thread; create one per forward pass.
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    /// Number of recorded nodes (leaves included).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a constant input. Gradients do not flow to it.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf(value, false)
    }

    /// Record a differentiable input (a parameter or probe point).
    pub fn leaf_grad(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf(value, true)
    }

    fn push_leaf(&mut self, value: Tensor, needs_grad: bool) -> Result<Var> {
        if let Some(index) = value.first_non_finite() {
            return Err(TensorError::NonFinite { op: "leaf", index });
        }
        Ok(self.push(value, needs_grad, Op::Leaf))
    }

    pub(crate) fn push(&mut self, value: Tensor, needs_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of `v`, present only if gradients flowed to it
    /// during backward. Detached leaves return `None` rather than a zero
    /// tensor.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub(crate) fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Reverse sweep from a scalar output, seeding its gradient with 1.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        if self.nodes[out.0].value.numel() != 1 {
            return Err(TensorError::NonScalarOutput {
                got: self.nodes[out.0].value.shape().to_vec(),
            });
        }
        let seed = Tensor::new(
            self.nodes[out.0].value.shape().to_vec(),
            vec![1.0],
        )?;
        self.backward_seeded(&[(out, seed)])
    }

    /// Reverse sweep with explicit upstream gradients for several nodes.
    /// This is the general vector-Jacobian entry point; `backward` is the
    /// scalar special case.
    pub fn backward_seeded(&mut self, seeds: &[(Var, Tensor)]) -> Result<()> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        self.consumed = true;
        let mut top = 0usize;
        for (v, g) in seeds {
            if g.shape() != self.nodes[v.0].value.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "backward_seeded",
                    lhs: g.shape().to_vec(),
                    rhs: self.nodes[v.0].value.shape().to_vec(),
                });
            }
            self.accum(*v, g.data());
            top = top.max(v.0);
        }
        for i in (0..=top).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            self.backward_node(i);
        }
        Ok(())
    }

    /// Apply the VJP of node `i`, accumulating into its inputs' grads.
    /// The op record and upstream gradient are cloned out to keep the
    /// borrow on `self.nodes` short; both are small at desk scale.
    fn backward_node(&mut self, i: usize) {
        let dy_t = self.nodes[i].grad.clone().expect("grad present");
        let dy = dy_t.data();
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf => {}

            Op::Matmul { a, b } => {
                let (m, k) = mat_dims(&self.nodes[a.0].value);
                let n = mat_dims(&self.nodes[b.0].value).1;
                if self.needs_grad(a) {
                    // dA = dY @ B^T
                    let shape_a = self.nodes[a.0].value.shape().to_vec();
                    let mut da = self.nodes[a.0].grad.take().unwrap_or_else(|| Tensor::zeros(&shape_a));
                    {
                        let bv = self.nodes[b.0].value.data();
                        unsafe {
                            matrixmultiply::dgemm(
                                m, n, k, 1.0,
                                dy.as_ptr(), n as isize, 1,
                                bv.as_ptr(), 1, n as isize,
                                1.0,
                                da.data_mut().as_mut_ptr(), k as isize, 1,
                            );
                        }
                    }
                    self.nodes[a.0].grad = Some(da);
                }
                if self.needs_grad(b) {
                    // dB = A^T @ dY
                    let shape_b = self.nodes[b.0].value.shape().to_vec();
                    let mut db = self.nodes[b.0].grad.take().unwrap_or_else(|| Tensor::zeros(&shape_b));
                    {
                        let av = self.nodes[a.0].value.data();
                        unsafe {
                            matrixmultiply::dgemm(
                                k, m, n, 1.0,
                                av.as_ptr(), 1, k as isize,
                                dy.as_ptr(), n as isize, 1,
                                1.0,
                                db.data_mut().as_mut_ptr(), n as isize, 1,
                            );
                        }
                    }
                    self.nodes[b.0].grad = Some(db);
                }
            }

            Op::Transpose { x } => {
                if self.needs_grad(x) {
                    let (r, c) = mat_dims(&self.nodes[i].value); // transposed dims
                    let mut dx = vec![0.0; r * c];
                    for p in 0..r {
                        for q in 0..c {
                            dx[q * r + p] = dy[p * c + q];
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::Add { a, b } => {
                if self.needs_grad(a) {
                    self.accum(a, dy);
                }
                if self.needs_grad(b) {
                    self.accum(b, dy);
                }
            }

            Op::Sub { a, b } => {
                if self.needs_grad(a) {
                    self.accum(a, dy);
                }
                if self.needs_grad(b) {
                    let neg: Vec<f64> = dy.iter().map(|v| -v).collect();
                    self.accum(b, &neg);
                }
            }

            Op::Mul { a, b } => {
                if self.needs_grad(a) {
                    let da: Vec<f64> = dy
                        .iter()
                        .zip(self.nodes[b.0].value.data())
                        .map(|(d, v)| d * v)
                        .collect();
                    self.accum(a, &da);
                }
                if self.needs_grad(b) {
                    let db: Vec<f64> = dy
                        .iter()
                        .zip(self.nodes[a.0].value.data())
                        .map(|(d, v)| d * v)
                        .collect();
                    self.accum(b, &db);
                }
            }

            Op::Scale { x, c } => {
                if self.needs_grad(x) {
                    let dx: Vec<f64> = dy.iter().map(|d| d * c).collect();
                    self.accum(x, &dx);
                }
            }

            Op::AddRow { x, row } => {
                let cols = self.nodes[row.0].value.numel();
                if self.needs_grad(x) {
                    self.accum(x, dy);
                }
                if self.needs_grad(row) {
                    let mut dr = vec![0.0; cols];
                    for (j, d) in dy.iter().enumerate() {
                        dr[j % cols] += d;
                    }
                    self.accum(row, &dr);
                }
            }

            Op::MulRow { x, row } => {
                let cols = self.nodes[row.0].value.numel();
                if self.needs_grad(x) {
                    let rv = self.nodes[row.0].value.data();
                    let dx: Vec<f64> = dy
                        .iter()
                        .enumerate()
                        .map(|(j, d)| d * rv[j % cols])
                        .collect();
                    self.accum(x, &dx);
                }
                if self.needs_grad(row) {
                    let xv = self.nodes[x.0].value.data();
                    let mut dr = vec![0.0; cols];
                    for (j, d) in dy.iter().enumerate() {
                        dr[j % cols] += d * xv[j];
                    }
                    self.accum(row, &dr);
                }
            }

            Op::Exp { x } => {
                if self.needs_grad(x) {
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(self.nodes[i].value.data())
                        .map(|(d, y)| d * y)
                        .collect();
                    self.accum(x, &dx);
                }
            }

            Op::Log { x } => {
                if self.needs_grad(x) {
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(self.nodes[x.0].value.data())
                        .map(|(d, v)| d / v)
                        .collect();
                    self.accum(x, &dx);
                }
            }

            Op::Silu { x } => {
                if self.needs_grad(x) {
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(self.nodes[x.0].value.data())
                        .map(|(d, &v)| {
                            let s = sigmoid(v);
                            d * (s + v * s * (1.0 - s))
                        })
                        .collect();
                    self.accum(x, &dx);
                }
            }

            Op::SoftmaxRows { x } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[i].value.rows_cols("softmax_rows").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    {
                        let yv = self.nodes[i].value.data();
                        for p in 0..r {
                            let row = p * c;
                            let dot: f64 = (0..c).map(|q| dy[row + q] * yv[row + q]).sum();
                            for q in 0..c {
                                dx[row + q] = yv[row + q] * (dy[row + q] - dot);
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::LogSoftmaxRows { x } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[i].value.rows_cols("log_softmax_rows").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    {
                        let yv = self.nodes[i].value.data();
                        for p in 0..r {
                            let row = p * c;
                            let sum_dy: f64 = (0..c).map(|q| dy[row + q]).sum();
                            for q in 0..c {
                                dx[row + q] = dy[row + q] - yv[row + q].exp() * sum_dy;
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::LayerNormRows { x, inv_std, mean } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[x.0].value.rows_cols("layer_norm_rows").expect("checked");
                    let cf = c as f64;
                    let mut dx = vec![0.0; r * c];
                    {
                        let xv = self.nodes[x.0].value.data();
                        for p in 0..r {
                            let row = p * c;
                            let is = inv_std[p];
                            let mu = mean[p];
                            let mut mean_dy = 0.0;
                            let mut mean_dy_xhat = 0.0;
                            for q in 0..c {
                                let xhat = (xv[row + q] - mu) * is;
                                mean_dy += dy[row + q];
                                mean_dy_xhat += dy[row + q] * xhat;
                            }
                            mean_dy /= cf;
                            mean_dy_xhat /= cf;
                            for q in 0..c {
                                let xhat = (xv[row + q] - mu) * is;
                                dx[row + q] = is * (dy[row + q] - mean_dy - xhat * mean_dy_xhat);
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::L2NormRows { x, norms } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[i].value.rows_cols("l2_normalize_rows").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    {
                        let yv = self.nodes[i].value.data();
                        for p in 0..r {
                            let row = p * c;
                            let dot: f64 = (0..c).map(|q| dy[row + q] * yv[row + q]).sum();
                            for q in 0..c {
                                dx[row + q] = (dy[row + q] - yv[row + q] * dot) / norms[p];
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::SumAll { x } => {
                if self.needs_grad(x) {
                    let dx = vec![dy[0]; self.nodes[x.0].value.numel()];
                    self.accum(x, &dx);
                }
            }

            Op::MeanAll { x } => {
                if self.needs_grad(x) {
                    let n = self.nodes[x.0].value.numel();
                    let dx = vec![dy[0] / n as f64; n];
                    self.accum(x, &dx);
                }
            }

            Op::ReduceSum { x, axis } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[x.0].value.rows_cols("reduce_sum").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    for p in 0..r {
                        for q in 0..c {
                            dx[p * c + q] = match axis {
                                Axis::Rows => dy[q],
                                Axis::Cols => dy[p],
                            };
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::ReduceMean { x, axis } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[x.0].value.rows_cols("reduce_mean").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    for p in 0..r {
                        for q in 0..c {
                            dx[p * c + q] = match axis {
                                Axis::Rows => dy[q] / r as f64,
                                Axis::Cols => dy[p] / c as f64,
                            };
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::ReduceMax { x, axis, argmax } => {
                if self.needs_grad(x) {
                    let (r, c) = self.nodes[x.0].value.rows_cols("reduce_max").expect("checked");
                    let mut dx = vec![0.0; r * c];
                    match axis {
                        Axis::Rows => {
                            for q in 0..c {
                                dx[argmax[q] * c + q] = dy[q];
                            }
                        }
                        Axis::Cols => {
                            for p in 0..r {
                                dx[p * c + argmax[p]] = dy[p];
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }

            Op::GatherIndex { x, idx } => {
                if self.needs_grad(x) {
                    let (_, c) = self.nodes[x.0].value.rows_cols("gather_index").expect("checked");
                    let mut dx = vec![0.0; self.nodes[x.0].value.numel()];
                    for (p, &j) in idx.iter().enumerate() {
                        dx[p * c + j] = dy[p];
                    }
                    self.accum(x, &dx);
                }
            }

            Op::ConcatRows { xs } => {
                let mut offset = 0usize;
                for xv in xs {
                    let n = self.nodes[xv.0].value.numel();
                    if self.needs_grad(xv) {
                        let seg = dy[offset..offset + n].to_vec();
                        self.accum(xv, &seg);
                    }
                    offset += n;
                }
            }

            Op::SliceRows { x, start } => {
                if self.needs_grad(x) {
                    let (_, c) = self.nodes[x.0].value.rows_cols("slice_rows").expect("checked");
                    let mut dx = vec![0.0; self.nodes[x.0].value.numel()];
                    let base = start * c;
                    dx[base..base + dy.len()].copy_from_slice(dy);
                    self.accum(x, &dx);
                }
            }

            Op::Reshape { x } => {
                if self.needs_grad(x) {
                    self.accum(x, dy);
                }
            }

            Op::Conv2d { x, w, b } => {
                self.backward_conv2d(x, w, b, dy);
            }

            Op::Upsample2d { x } => {
                if self.needs_grad(x) {
                    let out_shape = self.nodes[i].value.shape().to_vec();
                    let in_shape = self.nodes[x.0].value.shape().to_vec();
                    let dx = super::ops::upsample2d_vjp(
                        dy,
                        out_shape[0],
                        out_shape[1],
                        in_shape[0],
                        in_shape[1],
                    );
                    self.accum(x, &dx);
                }
            }

            Op::AvgPool2d { x, factor: s } => {
                if self.needs_grad(x) {
                    let in_shape = self.nodes[x.0].value.shape().to_vec();
                    let (h, w) = (in_shape[0], in_shape[1]);
                    let (oh, ow) = (h / s, w / s);
                    let inv = 1.0 / (s * s) as f64;
                    let mut dx = vec![0.0; h * w];
                    for p in 0..oh {
                        for q in 0..ow {
                            let d = dy[p * ow + q] * inv;
                            for di in 0..s {
                                for dj in 0..s {
                                    dx[(p * s + di) * w + (q * s + dj)] = d;
                                }
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
            }
        }
    }

    fn backward_conv2d(&mut self, x: Var, w: Var, b: Var, dy: &[f64]) {
        let xs = self.nodes[x.0].value.shape().to_vec();
        let ws = self.nodes[w.0].value.shape().to_vec();
        let (cin, h, wid) = (xs[0], xs[1], xs[2]);
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        let (ph, pw) = (kh / 2, kw / 2);

        if self.needs_grad(x) {
            let mut dx = vec![0.0; cin * h * wid];
            {
                let wv = self.nodes[w.0].value.data();
                for co in 0..cout {
                    for oi in 0..h {
                        for oj in 0..wid {
                            let d = dy[(co * h + oi) * wid + oj];
                            if d == 0.0 {
                                continue;
                            }
                            for ci in 0..cin {
                                for ki in 0..kh {
                                    let ii = oi + ki;
                                    if ii < ph || ii - ph >= h {
                                        continue;
                                    }
                                    for kj in 0..kw {
                                        let jj = oj + kj;
                                        if jj < pw || jj - pw >= wid {
                                            continue;
                                        }
                                        dx[(ci * h + (ii - ph)) * wid + (jj - pw)] +=
                                            d * wv[((co * cin + ci) * kh + ki) * kw + kj];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            self.accum(x, &dx);
        }

        if self.needs_grad(w) {
            let mut dw = vec![0.0; cout * cin * kh * kw];
            {
                let xv = self.nodes[x.0].value.data();
                for co in 0..cout {
                    for ci in 0..cin {
                        for ki in 0..kh {
                            for kj in 0..kw {
                                let mut acc = 0.0;
                                for oi in 0..h {
                                    let ii = oi + ki;
                                    if ii < ph || ii - ph >= h {
                                        continue;
                                    }
                                    for oj in 0..wid {
                                        let jj = oj + kj;
                                        if jj < pw || jj - pw >= wid {
                                            continue;
                                        }
                                        acc += dy[(co * h + oi) * wid + oj]
                                            * xv[(ci * h + (ii - ph)) * wid + (jj - pw)];
                                    }
                                }
                                dw[((co * cin + ci) * kh + ki) * kw + kj] = acc;
                            }
                        }
                    }
                }
            }
            self.accum(w, &dw);
        }

        if self.needs_grad(b) {
            let mut db = vec![0.0; cout];
            for (co, slot) in db.iter_mut().enumerate() {
                *slot = dy[co * h * wid..(co + 1) * h * wid].iter().sum();
            }
            self.accum(b, &db);
        }
    }

    pub(crate) fn accum(&mut self, v: Var, delta: &[f64]) {
        let node = &mut self.nodes[v.0];
        match &mut node.grad {
            Some(g) => {
                for (gi, di) in g.data_mut().iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => {
                let t = Tensor::new(node.value.shape().to_vec(), delta.to_vec())
                    .expect("grad shape matches value");
                node.grad = Some(t);
            }
        }
    }
}

fn mat_dims(t: &Tensor) -> (usize, usize) {
    (t.shape()[0], t.shape()[1])
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
