//! Forward implementations of the primitive suite.
//!
//! Each op validates shapes, computes the output value, and records a
//! node; the matching backward rule lives in `tape.rs`. An output needs
//! gradients exactly when some input does. Ops that can manufacture
//! non-finite values from finite inputs (`exp`, `log`) check their
//! outputs; everything else preserves finiteness.

use super::tape::{Axis, Op, Tape, Var};
use super::{Result, Tensor, TensorError};

impl Tape {
    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.needs_grad(*v))
    }

    /// Matrix product `a @ b` for `[m,k] x [k,n]`. Backed by dgemm.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.value(a).shape().to_vec();
        let sb = self.value(b).shape().to_vec();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0,
                self.value(a).data().as_ptr(), k as isize, 1,
                self.value(b).data().as_ptr(), n as isize, 1,
                0.0,
                out.as_mut_ptr(), n as isize, 1,
            );
        }
        let needs = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, needs, Op::Matmul { a, b }))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 2 {
            return Err(TensorError::BadShape {
                op: "transpose",
                expected: "rank 2",
                got: s,
            });
        }
        let (r, c) = (s[0], s[1]);
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for p in 0..r {
            for q in 0..c {
                out[q * r + p] = xv[p * c + q];
            }
        }
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(vec![c, r], out)?, needs, Op::Transpose { x }))
    }

    fn elementwise_binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(TensorError::ShapeMismatch {
                op: name,
                lhs: self.value(a).shape().to_vec(),
                rhs: self.value(b).shape().to_vec(),
            });
        }
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        let needs = self.any_grad(&[a, b]);
        Ok(self.push(Tensor::new(shape, out)?, needs, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise_binary("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise_binary("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise_binary("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        if !c.is_finite() {
            return Err(TensorError::NonFinite { op: "scale", index: 0 });
        }
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * c).collect();
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::Scale { x, c }))
    }

    fn rowwise_broadcast(
        &mut self,
        name: &'static str,
        x: Var,
        row: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (_, c) = self.value(x).rows_cols(name)?;
        if self.value(row).numel() != c {
            return Err(TensorError::ShapeMismatch {
                op: name,
                lhs: self.value(x).shape().to_vec(),
                rhs: self.value(row).shape().to_vec(),
            });
        }
        let rv = self.value(row).data();
        let out: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(j, &v)| f(v, rv[j % c]))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let needs = self.any_grad(&[x, row]);
        Ok(self.push(Tensor::new(shape, out)?, needs, op))
    }

    /// `x + row` broadcast over rows: `[r,c] + [c]`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.rowwise_broadcast("add_row", x, row, |a, b| a + b, Op::AddRow { x, row })
    }

    /// `x * row` broadcast over rows: `[r,c] * [c]`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var> {
        self.rowwise_broadcast("mul_row", x, row, |a, b| a * b, Op::MulRow { x, row })
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.exp()).collect();
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "exp", index });
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::Exp { x }))
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v.ln()).collect();
        if let Some(index) = out.iter().position(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite { op: "log", index });
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::Log { x }))
    }

    /// SiLU `x * sigmoid(x)` — the one smooth activation used by the
    /// model's MLPs.
    pub fn silu(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|&v| v * super::tape::sigmoid(v))
            .collect();
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::Silu { x }))
    }

    /// Row-wise softmax with max subtraction. Rank-1 input is one row.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("softmax_rows")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for p in 0..r {
            let row = &xv[p * c..(p + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for q in 0..c {
                let e = (row[q] - m).exp();
                out[p * c + q] = e;
                sum += e;
            }
            for q in 0..c {
                out[p * c + q] /= sum;
            }
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::SoftmaxRows { x }))
    }

    /// Row-wise log-softmax (stable log of `softmax_rows`).
    pub fn log_softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("log_softmax_rows")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for p in 0..r {
            let row = &xv[p * c..(p + 1) * c];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            for q in 0..c {
                out[p * c + q] = row[q] - lse;
            }
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::LogSoftmaxRows { x }))
    }

    /// Row-wise layer normalization (zero mean, unit variance, eps 1e-8).
    /// Pure normalization; learned affine terms are separate `mul_row` /
    /// `add_row` ops.
    pub fn layer_norm_rows(&mut self, x: Var) -> Result<Var> {
        const EPS: f64 = 1e-8;
        let (r, c) = self.value(x).rows_cols("layer_norm_rows")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut mean = vec![0.0; r];
        for p in 0..r {
            let row = &xv[p * c..(p + 1) * c];
            let mu: f64 = row.iter().sum::<f64>() / c as f64;
            let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + EPS).sqrt();
            for q in 0..c {
                out[p * c + q] = (row[q] - mu) * is;
            }
            inv_std[p] = is;
            mean[p] = mu;
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(shape, out)?,
            needs,
            Op::LayerNormRows { x, inv_std, mean },
        ))
    }

    /// Normalize each row to unit L2 norm. Zero rows are rejected.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("l2_normalize_rows")?;
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        let mut norms = vec![0.0; r];
        for p in 0..r {
            let row = &xv[p * c..(p + 1) * c];
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(TensorError::Invalid {
                    op: "l2_normalize_rows",
                    msg: format!("row {} has zero norm", p),
                });
            }
            for q in 0..c {
                out[p * c + q] = row[q] / n;
            }
            norms[p] = n;
        }
        let shape = self.value(x).shape().to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::L2NormRows { x, norms }))
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let s: f64 = self.value(x).data().iter().sum();
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::scalar(s), needs, Op::SumAll { x }))
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        if n == 0 {
            return Err(TensorError::Invalid {
                op: "mean_all",
                msg: "empty tensor".into(),
            });
        }
        let s: f64 = self.value(x).data().iter().sum::<f64>() / n as f64;
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::scalar(s), needs, Op::MeanAll { x }))
    }

    /// Sum over one axis of a `[r,c]` tensor; `Axis::Rows` yields `[c]`,
    /// `Axis::Cols` yields `[r]`.
    pub fn reduce_sum(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("reduce_sum")?;
        let xv = self.value(x).data();
        let out = reduce_values(xv, r, c, axis, |acc, v| acc + v, 0.0);
        let shape = match axis {
            Axis::Rows => vec![c],
            Axis::Cols => vec![r],
        };
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::ReduceSum { x, axis }))
    }

    pub fn reduce_mean(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("reduce_mean")?;
        let xv = self.value(x).data();
        let mut out = reduce_values(xv, r, c, axis, |acc, v| acc + v, 0.0);
        let denom = match axis {
            Axis::Rows => r as f64,
            Axis::Cols => c as f64,
        };
        for v in &mut out {
            *v /= denom;
        }
        let shape = match axis {
            Axis::Rows => vec![c],
            Axis::Cols => vec![r],
        };
        let needs = self.needs_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, needs, Op::ReduceMean { x, axis }))
    }

    /// Max over one axis. Ties keep the first (lowest-index) maximum, so
    /// the subgradient routing is deterministic.
    pub fn reduce_max(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("reduce_max")?;
        let xv = self.value(x).data();
        let (out, argmax) = match axis {
            Axis::Rows => {
                let mut out = vec![f64::NEG_INFINITY; c];
                let mut arg = vec![0usize; c];
                for p in 0..r {
                    for q in 0..c {
                        let v = xv[p * c + q];
                        if v > out[q] {
                            out[q] = v;
                            arg[q] = p;
                        }
                    }
                }
                (out, arg)
            }
            Axis::Cols => {
                let mut out = vec![f64::NEG_INFINITY; r];
                let mut arg = vec![0usize; r];
                for p in 0..r {
                    for q in 0..c {
                        let v = xv[p * c + q];
                        if v > out[p] {
                            out[p] = v;
                            arg[p] = q;
                        }
                    }
                }
                (out, arg)
            }
        };
        let shape = match axis {
            Axis::Rows => vec![c],
            Axis::Cols => vec![r],
        };
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(shape, out)?,
            needs,
            Op::ReduceMax { x, axis, argmax },
        ))
    }

    /// Pick one column per row: `out[p] = x[p, idx[p]]`.
    pub fn gather_index(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("gather_index")?;
        if idx.len() != r {
            return Err(TensorError::Invalid {
                op: "gather_index",
                msg: format!("{} indices for {} rows", idx.len(), r),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&j| j >= c) {
            return Err(TensorError::Invalid {
                op: "gather_index",
                msg: format!("index {} out of range for {} columns", bad, c),
            });
        }
        let xv = self.value(x).data();
        let out: Vec<f64> = idx.iter().enumerate().map(|(p, &j)| xv[p * c + j]).collect();
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(vec![r], out)?,
            needs,
            Op::GatherIndex { x, idx: idx.to_vec() },
        ))
    }

    /// Stack 2-D blocks with equal column counts along the row axis.
    pub fn concat_rows(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(TensorError::Invalid {
                op: "concat_rows",
                msg: "no inputs".into(),
            });
        }
        let (_, c0) = self.value(xs[0]).rows_cols("concat_rows")?;
        let mut rows = 0usize;
        for &v in xs {
            let (r, c) = self.value(v).rows_cols("concat_rows")?;
            if c != c0 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.value(xs[0]).shape().to_vec(),
                    rhs: self.value(v).shape().to_vec(),
                });
            }
            rows += r;
        }
        let mut out = Vec::with_capacity(rows * c0);
        for &v in xs {
            out.extend_from_slice(self.value(v).data());
        }
        let needs = self.any_grad(xs);
        Ok(self.push(
            Tensor::new(vec![rows, c0], out)?,
            needs,
            Op::ConcatRows { xs: xs.to_vec() },
        ))
    }

    /// Rows `start..end` of a 2-D tensor.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (r, c) = self.value(x).rows_cols("slice_rows")?;
        if start >= end || end > r {
            return Err(TensorError::Invalid {
                op: "slice_rows",
                msg: format!("range {}..{} out of {} rows", start, end, r),
            });
        }
        let out = self.value(x).data()[start * c..end * c].to_vec();
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(vec![end - start, c], out)?,
            needs,
            Op::SliceRows { x, start },
        ))
    }

    /// Reinterpret the shape; element count must match. Free in both
    /// directions.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let numel: usize = shape.iter().product();
        if numel != self.value(x).numel() {
            return Err(TensorError::BadShape {
                op: "reshape",
                expected: "matching element count",
                got: shape.to_vec(),
            });
        }
        let out = Tensor::new(shape.to_vec(), self.value(x).data().to_vec())?;
        let needs = self.needs_grad(x);
        Ok(self.push(out, needs, Op::Reshape { x }))
    }

    /// Same-padding stride-1 2-D convolution: `[cin,h,w]` with weights
    /// `[cout,cin,kh,kw]` (odd kernel) and bias `[cout]` to `[cout,h,w]`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 4 || ws[1] != xs[0] {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: xs,
                rhs: ws,
            });
        }
        let (cin, h, wid) = (xs[0], xs[1], xs[2]);
        let (cout, kh, kw) = (ws[0], ws[2], ws[3]);
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(TensorError::BadShape {
                op: "conv2d",
                expected: "odd kernel extents",
                got: ws,
            });
        }
        if self.value(b).numel() != cout {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                lhs: self.value(b).shape().to_vec(),
                rhs: vec![cout],
            });
        }
        let (ph, pw) = (kh / 2, kw / 2);
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; cout * h * wid];
        for co in 0..cout {
            for oi in 0..h {
                for oj in 0..wid {
                    let mut acc = bv[co];
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
                                acc += xv[(ci * h + (ii - ph)) * wid + (jj - pw)]
                                    * wv[((co * cin + ci) * kh + ki) * kw + kj];
                            }
                        }
                    }
                    out[(co * h + oi) * wid + oj] = acc;
                }
            }
        }
        let needs = self.any_grad(&[x, w, b]);
        Ok(self.push(
            Tensor::new(vec![cout, h, wid], out)?,
            needs,
            Op::Conv2d { x, w, b },
        ))
    }

    /// Bilinear upsampling of a `[h,w]` map to `[out_h,out_w]`
    /// (half-pixel centers, edge clamped).
    pub fn upsample2d(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 2 {
            return Err(TensorError::BadShape {
                op: "upsample2d",
                expected: "rank 2",
                got: s,
            });
        }
        let (h, w) = (s[0], s[1]);
        let xv = self.value(x).data();
        let mut out = vec![0.0; out_h * out_w];
        for oi in 0..out_h {
            let (i0, i1, fi) = sample_coords(oi, out_h, h);
            for oj in 0..out_w {
                let (j0, j1, fj) = sample_coords(oj, out_w, w);
                out[oi * out_w + oj] = (1.0 - fi) * (1.0 - fj) * xv[i0 * w + j0]
                    + (1.0 - fi) * fj * xv[i0 * w + j1]
                    + fi * (1.0 - fj) * xv[i1 * w + j0]
                    + fi * fj * xv[i1 * w + j1];
            }
        }
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(vec![out_h, out_w], out)?,
            needs,
            Op::Upsample2d { x },
        ))
    }

    /// Average pooling of a `[h,w]` map by an integer factor.
    pub fn avg_pool2d(&mut self, x: Var, factor: usize) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 2 || factor == 0 || s[0] % factor != 0 || s[1] % factor != 0 {
            return Err(TensorError::BadShape {
                op: "avg_pool2d",
                expected: "rank 2 divisible by factor",
                got: s,
            });
        }
        let (h, w) = (s[0], s[1]);
        let (oh, ow) = (h / factor, w / factor);
        let xv = self.value(x).data();
        let inv = 1.0 / (factor * factor) as f64;
        let mut out = vec![0.0; oh * ow];
        for p in 0..oh {
            for q in 0..ow {
                let mut acc = 0.0;
                for di in 0..factor {
                    for dj in 0..factor {
                        acc += xv[(p * factor + di) * w + (q * factor + dj)];
                    }
                }
                out[p * ow + q] = acc * inv;
            }
        }
        let needs = self.needs_grad(x);
        Ok(self.push(
            Tensor::new(vec![oh, ow], out)?,
            needs,
            Op::AvgPool2d { x, factor },
        ))
    }
}

/// Source interpolation coordinates for bilinear sampling with half-pixel
/// centers: output pixel center mapped into input space, clamped at edges.
fn sample_coords(out_idx: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((out_idx as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
    let i0 = src.floor() as usize;
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

/// Scatter VJP of `upsample2d`: transpose of the interpolation weights.
pub(crate) fn upsample2d_vjp(
    dy: &[f64],
    out_h: usize,
    out_w: usize,
    in_h: usize,
    in_w: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; in_h * in_w];
    for oi in 0..out_h {
        let (i0, i1, fi) = sample_coords(oi, out_h, in_h);
        for oj in 0..out_w {
            let (j0, j1, fj) = sample_coords(oj, out_w, in_w);
            let d = dy[oi * out_w + oj];
            dx[i0 * in_w + j0] += (1.0 - fi) * (1.0 - fj) * d;
            dx[i0 * in_w + j1] += (1.0 - fi) * fj * d;
            dx[i1 * in_w + j0] += fi * (1.0 - fj) * d;
            dx[i1 * in_w + j1] += fi * fj * d;
        }
    }
    dx
}

fn reduce_values(
    xv: &[f64],
    r: usize,
    c: usize,
    axis: Axis,
    f: impl Fn(f64, f64) -> f64,
    init: f64,
) -> Vec<f64> {
    match axis {
        Axis::Rows => {
            let mut out = vec![init; c];
            for p in 0..r {
                for q in 0..c {
                    out[q] = f(out[q], xv[p * c + q]);
                }
            }
            out
        }
        Axis::Cols => {
            let mut out = vec![init; r];
            for p in 0..r {
                for q in 0..c {
                    out[p] = f(out[p], xv[p * c + q]);
                }
            }
            out
        }
    }
}
