//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] is a tape: every operation appends a node holding its output
//! value and enough saved state to run its backward rule. [`Graph::backward`]
//! walks the tape in exact reverse order of recording and returns the
//! gradients of every trainable parameter that took part in the computation.
//! Graphs are cheap and meant to be dropped after a single step.

use std::borrow::Cow;

use crate::error::{NumericsError, Result};
use crate::params::{ParamGrads, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{matmul_into, matmul_nt_into, matmul_tn_into, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Max,
    Mean,
}

enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Prelu {
        x: Var,
        slope: Var,
    },
    Conv1d {
        x: Var,
        w: Var,
    },
    Conv1dBias {
        x: Var,
        w: Var,
        b: Var,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<usize>,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows {
        x: Var,
        start: usize,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    GlobalPool {
        x: Var,
        len: usize,
        mode: PoolMode,
        argmax: Vec<usize>,
    },
    ScaleCols {
        x: Var,
        scales: Vec<T>,
    },
    Gather {
        table: Var,
        rows: Vec<usize>,
        frozen_row: Option<usize>,
    },
    Sum(Var),
    SumSquares(Var),
    SoftmaxCe {
        logits: Var,
        target: usize,
        probs: Vec<T>,
    },
    BceLogit {
        logit: Var,
        target: T,
        prob: T,
    },
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Constant | Op::Param(_) => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRow(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Prelu { x, slope } => vec![*x, *slope],
            Op::Conv1d { x, w } => vec![*x, *w],
            Op::Conv1dBias { x, w, b } => vec![*x, *w, *b],
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.clone(),
            Op::Scale(x, _)
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::MaxPool2 { x, .. }
            | Op::SliceRows { x, .. }
            | Op::SliceCols { x, .. }
            | Op::GlobalPool { x, .. }
            | Op::ScaleCols { x, .. }
            | Op::Sum(x)
            | Op::SumSquares(x)
            | Op::SoftmaxCe { logits: x, .. }
            | Op::BceLogit { logit: x, .. } => vec![*x],
            Op::Gather { table, .. } => vec![*table],
        }
    }
}

struct Node<'p, T: Clone> {
    value: Cow<'p, Tensor<T>>,
    op: Op<T>,
    needs_grad: bool,
}

/// The differentiation tape. Parameter values are borrowed from a
/// [`ParamStore`], never copied.
pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<'p, T>>,
    param_nodes: Vec<Option<Var>>,
}

pub(crate) fn stable_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / s).collect()
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    stable_sigmoid(x)
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    /// Number of recorded operations.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// First element of `v`; intended for `[1]` losses.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        let needs_grad = op.parents().iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let p = self.params.get(id);
        self.nodes.push(Node {
            value: Cow::Borrowed(&p.value),
            op: Op::Param(id),
            needs_grad: p.trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<Var> {
        let id = self.params.id(name)?;
        Ok(self.param(id))
    }

    fn matrix_dims(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(NumericsError::shape(op, "a matrix [rows, cols]", s));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NumericsError::shape(
                "add",
                format!("{:?}", va.shape()),
                vb.shape(),
            ));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x + y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Adds a length-`n` bias to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.matrix_dims("add_row", a)?;
        let vb = self.value(bias);
        if vb.len() != n {
            return Err(NumericsError::shape(
                "add_row",
                format!("bias of {n} entries"),
                vb.shape(),
            ));
        }
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n) {
            for (o, &b) in row.iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::AddRow(a, bias)))
    }

    /// `x @ w + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NumericsError::shape(
                "mul",
                format!("{:?}", va.shape()),
                vb.shape(),
            ));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x * y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let out = self.value(a).map(|v| v * s);
        self.push(out, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(stable_sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|v| v.tanh());
        self.push(out, Op::Tanh(a))
    }

    /// Parametric ReLU with one learnable slope per channel (column).
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        let (_, c) = self.matrix_dims("prelu", x)?;
        let vs = self.value(slope);
        if vs.len() != c {
            return Err(NumericsError::shape(
                "prelu",
                format!("{c} slopes"),
                vs.shape(),
            ));
        }
        let slopes = vs.data().to_vec();
        let vx = self.value(x);
        let mut data = vx.data().to_vec();
        for row in data.chunks_mut(c) {
            for (v, &a) in row.iter_mut().zip(&slopes) {
                if *v <= T::zero() {
                    *v *= a;
                }
            }
        }
        let out = Tensor::new(vx.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Prelu { x, slope }))
    }

    fn conv_dims(&self, x: Var, w: Var) -> Result<(usize, usize, usize, usize)> {
        let (n, ci) = self.matrix_dims("conv1d", x)?;
        let ws = self.shape(w);
        if ws.len() != 3 || ws[1] != ci || ws[0] == 0 {
            return Err(NumericsError::shape(
                "conv1d",
                format!("kernel [k, {ci}, c_out]"),
                ws,
            ));
        }
        Ok((n, ci, ws[0], ws[2]))
    }

    fn conv_forward(&self, x: Var, w: Var, bias: Option<&[T]>) -> Result<Tensor<T>> {
        let (n, ci, k, co) = self.conv_dims(x, w)?;
        let pad = (k - 1) / 2;
        let (xd, wd) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![T::zero(); n * co];
        for t in 0..n {
            let out_row = &mut out[t * co..(t + 1) * co];
            if let Some(b) = bias {
                out_row.copy_from_slice(b);
            }
            for j in 0..k {
                let Some(s) = (t + j).checked_sub(pad).filter(|&s| s < n) else {
                    continue;
                };
                matmul_into(
                    &xd[s * ci..(s + 1) * ci],
                    &wd[j * ci * co..(j + 1) * ci * co],
                    out_row,
                    1,
                    ci,
                    co,
                );
            }
        }
        Tensor::new(vec![n, co], out)
    }

    /// Same-padded 1-D convolution over rows: `x [n, c_in]`, `w [k, c_in, c_out]`.
    /// Output keeps length `n`; positions outside the sequence read zeros.
    pub fn conv1d(&mut self, x: Var, w: Var) -> Result<Var> {
        let out = self.conv_forward(x, w, None)?;
        Ok(self.push(out, Op::Conv1d { x, w }))
    }

    pub fn conv1d_bias(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (_, _, _, co) = self.conv_dims(x, w)?;
        let vb = self.value(b);
        if vb.len() != co {
            return Err(NumericsError::shape(
                "conv1d",
                format!("bias of {co} entries"),
                vb.shape(),
            ));
        }
        let bias = vb.data().to_vec();
        let out = self.conv_forward(x, w, Some(&bias))?;
        Ok(self.push(out, Op::Conv1dBias { x, w, b }))
    }

    /// Window-2, stride-2 max pooling over rows; an odd tail row forms its own window.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let (n, c) = self.matrix_dims("maxpool2", x)?;
        if n == 0 {
            return Err(NumericsError::invalid("maxpool2", "empty input"));
        }
        let out_n = n.div_ceil(2);
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(out_n * c);
        let mut argmax = Vec::with_capacity(out_n * c);
        for r in 0..out_n {
            let a = 2 * r;
            for ch in 0..c {
                let mut best = a;
                if a + 1 < n && xd[(a + 1) * c + ch] > xd[a * c + ch] {
                    best = a + 1;
                }
                out.push(xd[best * c + ch]);
                argmax.push(best);
            }
        }
        let out = Tensor::new(vec![out_n, c], out)?;
        Ok(self.push(out, Op::MaxPool2 { x, argmax }))
    }

    pub fn concat_cols(&mut self, vars: &[Var]) -> Result<Var> {
        let first = *vars
            .first()
            .ok_or_else(|| NumericsError::invalid("concat_cols", "no inputs"))?;
        let (m, _) = self.matrix_dims("concat_cols", first)?;
        let mut widths = Vec::with_capacity(vars.len());
        for &v in vars {
            let (r, c) = self.matrix_dims("concat_cols", v)?;
            if r != m {
                return Err(NumericsError::shape(
                    "concat_cols",
                    format!("{m} rows"),
                    self.shape(v),
                ));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for row in 0..m {
            for &v in vars {
                data.extend_from_slice(self.value(v).row_slice(row));
            }
        }
        let out = Tensor::new(vec![m, total], data)?;
        Ok(self.push(out, Op::ConcatCols(vars.to_vec())))
    }

    pub fn concat_rows(&mut self, vars: &[Var]) -> Result<Var> {
        let first = *vars
            .first()
            .ok_or_else(|| NumericsError::invalid("concat_rows", "no inputs"))?;
        let (_, c) = self.matrix_dims("concat_rows", first)?;
        let mut rows = 0;
        for &v in vars {
            let (r, cc) = self.matrix_dims("concat_rows", v)?;
            if cc != c {
                return Err(NumericsError::shape(
                    "concat_rows",
                    format!("{c} columns"),
                    self.shape(v),
                ));
            }
            rows += r;
        }
        let mut data = Vec::with_capacity(rows * c);
        for &v in vars {
            data.extend_from_slice(self.value(v).data());
        }
        let out = Tensor::new(vec![rows, c], data)?;
        Ok(self.push(out, Op::ConcatRows(vars.to_vec())))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (n, c) = self.matrix_dims("slice_rows", x)?;
        if start >= end || end > n {
            return Err(NumericsError::invalid(
                "slice_rows",
                format!("range {start}..{end} of {n} rows"),
            ));
        }
        let data = self.value(x).data()[start * c..end * c].to_vec();
        let out = Tensor::new(vec![end - start, c], data)?;
        Ok(self.push(out, Op::SliceRows { x, start }))
    }

    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        self.slice_rows(x, i, i + 1)
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let (n, c) = self.matrix_dims("slice_cols", x)?;
        if start >= end || end > c {
            return Err(NumericsError::invalid(
                "slice_cols",
                format!("range {start}..{end} of {c} columns"),
            ));
        }
        let xd = self.value(x).data();
        let mut data = Vec::with_capacity(n * (end - start));
        for r in 0..n {
            data.extend_from_slice(&xd[r * c + start..r * c + end]);
        }
        let out = Tensor::new(vec![n, end - start], data)?;
        Ok(self.push(out, Op::SliceCols { x, start }))
    }

    /// Pools the first `len` rows of `x [n, c]` into `[1, c]`; rows past `len` are padding.
    pub fn global_pool(&mut self, x: Var, len: usize, mode: PoolMode) -> Result<Var> {
        let (n, c) = self.matrix_dims("global_pool", x)?;
        if len == 0 || len > n {
            return Err(NumericsError::invalid(
                "global_pool",
                format!("true length {len} outside 1..={n}"),
            ));
        }
        let xd = self.value(x).data();
        let mut out = Vec::with_capacity(c);
        let mut argmax = Vec::new();
        match mode {
            PoolMode::Max => {
                argmax.reserve(c);
                for ch in 0..c {
                    let mut best = 0;
                    for t in 1..len {
                        if xd[t * c + ch] > xd[best * c + ch] {
                            best = t;
                        }
                    }
                    out.push(xd[best * c + ch]);
                    argmax.push(best);
                }
            }
            PoolMode::Mean => {
                let inv = T::one() / T::of(len as f64);
                for ch in 0..c {
                    let s: T = (0..len).map(|t| xd[t * c + ch]).sum();
                    out.push(s * inv);
                }
            }
        }
        let out = Tensor::new(vec![1, c], out)?;
        Ok(self.push(
            out,
            Op::GlobalPool {
                x,
                len,
                mode,
                argmax,
            },
        ))
    }

    /// Multiplies column `j` of `x` by the constant `scales[j]`.
    pub fn scale_cols(&mut self, x: Var, scales: Vec<T>) -> Result<Var> {
        let (_, c) = self.matrix_dims("scale_cols", x)?;
        if scales.len() != c {
            return Err(NumericsError::invalid(
                "scale_cols",
                format!("{} scales for {c} columns", scales.len()),
            ));
        }
        let vx = self.value(x);
        let mut data = vx.data().to_vec();
        for row in data.chunks_mut(c) {
            for (v, &s) in row.iter_mut().zip(&scales) {
                *v *= s;
            }
        }
        let out = Tensor::new(vx.shape().to_vec(), data)?;
        Ok(self.push(out, Op::ScaleCols { x, scales }))
    }

    /// Selects rows of an embedding table. `frozen_row`, if given, never receives gradient.
    pub fn gather_rows(
        &mut self,
        table: Var,
        rows: &[usize],
        frozen_row: Option<usize>,
    ) -> Result<Var> {
        let (v, d) = self.matrix_dims("gather_rows", table)?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= v) {
            return Err(NumericsError::invalid(
                "gather_rows",
                format!("row {bad} out of {v}"),
            ));
        }
        let td = self.value(table);
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            data.extend_from_slice(td.row_slice(r));
        }
        let out = Tensor::new(vec![rows.len(), d], data)?;
        Ok(self.push(
            out,
            Op::Gather {
                table,
                rows: rows.to_vec(),
                frozen_row,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).sum_squares();
        self.push(Tensor::scalar(s), Op::SumSquares(x))
    }

    /// Mean-free cross entropy of one example: `-ln softmax(logits)[target]`.
    /// Returns the `[1]` loss node and the softmax probabilities.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<(Var, Vec<T>)> {
        let z = self.value(logits).data();
        if z.len() < 2 || target >= z.len() {
            return Err(NumericsError::invalid(
                "softmax_cross_entropy",
                format!("target {target} with {} logits", z.len()),
            ));
        }
        let m = z.iter().copied().fold(T::neg_infinity(), T::max);
        let s: T = z.iter().map(|&v| (v - m).exp()).sum();
        let loss = s.ln() + m - z[target];
        let probs: Vec<T> = z.iter().map(|&v| (v - m).exp() / s).collect();
        let node = self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                target,
                probs: probs.clone(),
            },
        );
        Ok((node, probs))
    }

    /// Binary cross entropy on a single logit; returns the loss node and `p = sigmoid(logit)`.
    pub fn binary_cross_entropy(&mut self, logit: Var, target: usize) -> Result<(Var, T)> {
        let z = self.value(logit).data();
        if z.len() != 1 || target > 1 {
            return Err(NumericsError::invalid(
                "binary_cross_entropy",
                format!("target {target} with {} logits", z.len()),
            ));
        }
        let z = z[0];
        let t = if target == 1 { T::one() } else { T::zero() };
        let loss = z.max(T::zero()) - z * t + (T::one() + (-z.abs()).exp()).ln();
        let prob = stable_sigmoid(z);
        let node = self.push(
            Tensor::scalar(loss),
            Op::BceLogit {
                logit,
                target: t,
                prob,
            },
        );
        Ok((node, prob))
    }

    /// Reverse sweep from a scalar `loss`, returning parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<ParamGrads<T>> {
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(NumericsError::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(ls, T::one()));
        let mut out = ParamGrads::empty(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backward_node(&node.op, &node.value, g, &mut grads, &mut out)?;
        }
        Ok(out)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Gradient buffer of `v`, created as zeros on first use.
    fn grad_slot<'g>(&self, grads: &'g mut [Option<Tensor<T>>], v: Var) -> &'g mut Tensor<T> {
        grads[v.0].get_or_insert_with(|| Tensor::zeros(self.shape(v)))
    }

    fn backward_node(
        &self,
        op: &Op<T>,
        y: &Tensor<T>,
        g: Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        out: &mut ParamGrads<T>,
    ) -> Result<()> {
        let mut acc = |v: Var, t: Tensor<T>| -> Result<()> {
            if !self.nodes[v.0].needs_grad {
                return Ok(());
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&t),
                slot @ None => {
                    *slot = Some(t);
                    Ok(())
                }
            }
        };
        match op {
            Op::Constant => {}
            Op::Param(id) => out.accumulate(*id, g)?,
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[1]);
                if self.needs(*a) {
                    matmul_nt_into(
                        g.data(),
                        vb.data(),
                        self.grad_slot(grads, *a).data_mut(),
                        m,
                        k,
                        n,
                    );
                }
                if self.needs(*b) {
                    matmul_tn_into(
                        va.data(),
                        g.data(),
                        self.grad_slot(grads, *b).data_mut(),
                        m,
                        k,
                        n,
                    );
                }
            }
            Op::Add(a, b) => {
                acc(*b, g.clone())?;
                acc(*a, g)?;
            }
            Op::AddRow(a, b) => {
                if self.needs(*b) {
                    let n = g.cols();
                    let mut db = vec![T::zero(); n];
                    for row in g.data().chunks(n) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    acc(*b, Tensor::new(self.shape(*b).to_vec(), db)?)?;
                }
                acc(*a, g)?;
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let d = g
                        .data()
                        .iter()
                        .zip(vb.data())
                        .map(|(&x, &y)| x * y)
                        .collect();
                    acc(*a, Tensor::new(g.shape().to_vec(), d)?)?;
                }
                if self.needs(*b) {
                    let d = g
                        .data()
                        .iter()
                        .zip(va.data())
                        .map(|(&x, &y)| x * y)
                        .collect();
                    acc(*b, Tensor::new(g.shape().to_vec(), d)?)?;
                }
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| v * *s))?,
            Op::Sigmoid(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * yv * (T::one() - yv))
                    .collect();
                acc(*a, Tensor::new(g.shape().to_vec(), d)?)?;
            }
            Op::Tanh(a) => {
                let d = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&gv, &yv)| gv * (T::one() - yv * yv))
                    .collect();
                acc(*a, Tensor::new(g.shape().to_vec(), d)?)?;
            }
            Op::Prelu { x, slope } => {
                let vx = self.value(*x);
                let slopes = self.value(*slope).data();
                let c = slopes.len();
                if self.needs(*slope) {
                    let mut ds = vec![T::zero(); c];
                    for (xr, gr) in vx.data().chunks(c).zip(g.data().chunks(c)) {
                        for ch in 0..c {
                            if xr[ch] <= T::zero() {
                                ds[ch] += gr[ch] * xr[ch];
                            }
                        }
                    }
                    acc(*slope, Tensor::new(self.shape(*slope).to_vec(), ds)?)?;
                }
                if self.needs(*x) {
                    let mut dx = g.data().to_vec();
                    for (dr, xr) in dx.chunks_mut(c).zip(vx.data().chunks(c)) {
                        for ch in 0..c {
                            if xr[ch] <= T::zero() {
                                dr[ch] *= slopes[ch];
                            }
                        }
                    }
                    acc(*x, Tensor::new(vx.shape().to_vec(), dx)?)?;
                }
            }
            Op::Conv1d { x, w } => self.conv_backward(*x, *w, None, &g, &mut acc)?,
            Op::Conv1dBias { x, w, b } => self.conv_backward(*x, *w, Some(*b), &g, &mut acc)?,
            Op::MaxPool2 { x, argmax } => {
                let vx = self.value(*x);
                let c = vx.cols();
                let mut dx = vec![T::zero(); vx.len()];
                for (idx, (&src, &gv)) in argmax.iter().zip(g.data()).enumerate() {
                    dx[src * c + idx % c] += gv;
                }
                acc(*x, Tensor::new(vx.shape().to_vec(), dx)?)?;
            }
            Op::ConcatCols(vars) => {
                let total = g.cols();
                let mut offset = 0;
                for &v in vars {
                    let vs = self.shape(v).to_vec();
                    let (m, c) = (vs[0], vs[1]);
                    if self.needs(v) {
                        let mut d = Vec::with_capacity(m * c);
                        for r in 0..m {
                            d.extend_from_slice(
                                &g.data()[r * total + offset..r * total + offset + c],
                            );
                        }
                        acc(v, Tensor::new(vs, d)?)?;
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(vars) => {
                let mut offset = 0;
                for &v in vars {
                    let vs = self.shape(v).to_vec();
                    let len = vs[0] * vs[1];
                    if self.needs(v) {
                        acc(v, Tensor::new(vs, g.data()[offset..offset + len].to_vec())?)?;
                    }
                    offset += len;
                }
            }
            Op::SliceRows { x, start } => {
                if self.needs(*x) {
                    let c = self.value(*x).cols();
                    let dx = self.grad_slot(grads, *x);
                    for (d, &v) in dx.data_mut()[start * c..start * c + g.len()]
                        .iter_mut()
                        .zip(g.data())
                    {
                        *d += v;
                    }
                }
            }
            Op::SliceCols { x, start } => {
                if self.needs(*x) {
                    let c = self.value(*x).cols();
                    let w = g.cols();
                    let dx = self.grad_slot(grads, *x);
                    for (dr, gr) in dx.data_mut().chunks_mut(c).zip(g.data().chunks(w)) {
                        for (d, &v) in dr[*start..*start + w].iter_mut().zip(gr) {
                            *d += v;
                        }
                    }
                }
            }
            Op::GlobalPool {
                x,
                len,
                mode,
                argmax,
            } => {
                let vx = self.value(*x);
                let c = vx.cols();
                let mut dx = vec![T::zero(); vx.len()];
                match mode {
                    PoolMode::Max => {
                        for (ch, &src) in argmax.iter().enumerate() {
                            dx[src * c + ch] += g.data()[ch];
                        }
                    }
                    PoolMode::Mean => {
                        let inv = T::one() / T::of(*len as f64);
                        for t in 0..*len {
                            for ch in 0..c {
                                dx[t * c + ch] += g.data()[ch] * inv;
                            }
                        }
                    }
                }
                acc(*x, Tensor::new(vx.shape().to_vec(), dx)?)?;
            }
            Op::ScaleCols { x, scales } => {
                let c = scales.len();
                let mut dx = g.data().to_vec();
                for row in dx.chunks_mut(c) {
                    for (v, &s) in row.iter_mut().zip(scales) {
                        *v *= s;
                    }
                }
                acc(*x, Tensor::new(g.shape().to_vec(), dx)?)?;
            }
            Op::Gather {
                table,
                rows,
                frozen_row,
            } => {
                if self.needs(*table) {
                    let d = self.value(*table).cols();
                    let dt = self.grad_slot(grads, *table).data_mut();
                    for (t, &r) in rows.iter().enumerate() {
                        if Some(r) == *frozen_row {
                            continue;
                        }
                        for (o, &gv) in dt[r * d..(r + 1) * d]
                            .iter_mut()
                            .zip(&g.data()[t * d..(t + 1) * d])
                        {
                            *o += gv;
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let s = self.shape(*x).to_vec();
                acc(*x, Tensor::full(&s, g.data()[0]))?;
            }
            Op::SumSquares(x) => {
                let two_g = T::of(2.0) * g.data()[0];
                acc(*x, self.value(*x).map(|v| v * two_g))?;
            }
            Op::SoftmaxCe {
                logits,
                target,
                probs,
            } => {
                let gv = g.data()[0];
                let d = probs
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| {
                        if k == *target {
                            (p - T::one()) * gv
                        } else {
                            p * gv
                        }
                    })
                    .collect();
                acc(*logits, Tensor::new(self.shape(*logits).to_vec(), d)?)?;
            }
            Op::BceLogit {
                logit,
                target,
                prob,
            } => {
                let d = (*prob - *target) * g.data()[0];
                acc(*logit, Tensor::new(self.shape(*logit).to_vec(), vec![d])?)?;
            }
        }
        Ok(())
    }

    fn conv_backward(
        &self,
        x: Var,
        w: Var,
        b: Option<Var>,
        g: &Tensor<T>,
        acc: &mut impl FnMut(Var, Tensor<T>) -> Result<()>,
    ) -> Result<()> {
        let (n, ci, k, co) = self.conv_dims(x, w)?;
        let pad = (k - 1) / 2;
        let (xd, wd, gd) = (self.value(x).data(), self.value(w).data(), g.data());
        if let Some(b) = b {
            if self.needs(b) {
                let mut db = vec![T::zero(); co];
                for row in gd.chunks(co) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                acc(b, Tensor::new(self.shape(b).to_vec(), db)?)?;
            }
        }
        if self.needs(w) {
            let mut dw = vec![T::zero(); k * ci * co];
            for t in 0..n {
                for j in 0..k {
                    let Some(s) = (t + j).checked_sub(pad).filter(|&s| s < n) else {
                        continue;
                    };
                    matmul_tn_into(
                        &xd[s * ci..(s + 1) * ci],
                        &gd[t * co..(t + 1) * co],
                        &mut dw[j * ci * co..(j + 1) * ci * co],
                        1,
                        ci,
                        co,
                    );
                }
            }
            acc(w, Tensor::new(vec![k, ci, co], dw)?)?;
        }
        if self.needs(x) {
            let mut dx = vec![T::zero(); n * ci];
            for t in 0..n {
                for j in 0..k {
                    let Some(s) = (t + j).checked_sub(pad).filter(|&s| s < n) else {
                        continue;
                    };
                    matmul_nt_into(
                        &gd[t * co..(t + 1) * co],
                        &wd[j * ci * co..(j + 1) * ci * co],
                        &mut dx[s * ci..(s + 1) * ci],
                        1,
                        ci,
                        co,
                    );
                }
            }
            acc(x, Tensor::new(vec![n, ci], dx)?)?;
        }
        Ok(())
    }
}
