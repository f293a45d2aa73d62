//! The tape: eager forward ops over 2-d `f64` tensors that record enough
//! structure to run reverse-mode backprop afterwards.
//!
//! A fresh tape is built per step. `backward` walks the op list in reverse
//! and accumulates gradients; repeated `backward` calls keep accumulating
//! (there is no implicit reset).

use super::{NoiseSource, NumError, Tensor};

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
    SliceCols { src: Var, start: usize },
    RepeatRows { src: Var },
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Log(Var),
    Exp(Var),
    Cos(Var),
    Scale(Var, f64),
    Softmax { src: Var, axis: usize },
    SumAll(Var),
    MeanAll(Var),
    Dropout { src: Var, mask: Vec<f64> },
    Clamp { src: Var, lo: f64, hi: f64 },
}

struct Node {
    shape: [usize; 2],
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Dynamic computation graph; owns all intermediate values.
pub struct Tape {
    nodes: Vec<Node>,
    ran_backward: bool,
}

// ── kernels ──────────────────────────────────────────────────────────────

fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `a (m×k) · b (k×n)`.
fn mm_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == 0.0 {
                continue;
            }
            let row = &b[l * n..(l + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                dst[j] += ail * row[j];
            }
        }
    }
    out
}

/// `x (p×q) · y (r×q)ᵀ`.
fn mm_nt(x: &[f64], y: &[f64], p: usize, q: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * r];
    for i in 0..p {
        let xi = &x[i * q..(i + 1) * q];
        for j in 0..r {
            let yj = &y[j * q..(j + 1) * q];
            out[i * r + j] = xi.iter().zip(yj).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// `x (m×k)ᵀ · y (m×n)`.
fn mm_tn(x: &[f64], y: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * n];
    for i in 0..m {
        let xi = &x[i * k..(i + 1) * k];
        let yi = &y[i * n..(i + 1) * n];
        for l in 0..k {
            let xil = xi[l];
            if xil == 0.0 {
                continue;
            }
            let dst = &mut out[l * n..(l + 1) * n];
            for j in 0..n {
                dst[j] += xil * yi[j];
            }
        }
    }
    out
}

// ── tape ─────────────────────────────────────────────────────────────────

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            ran_backward: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: [usize; 2], data: Vec<f64>, requires_grad: bool, op: Op) -> Var {
        debug_assert_eq!(shape[0] * shape[1], data.len());
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node {
            shape,
            data,
            grad,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.node(*v).requires_grad)
    }

    /// Registers a parameter tensor as a differentiable leaf (copies data).
    pub fn param(&mut self, t: &Tensor) -> Var {
        self.push(t.shape, t.data.clone(), t.requires_grad, Op::Leaf)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::LengthMismatch {
                op: "constant",
                len: data.len(),
                shape: [rows, cols],
            });
        }
        Ok(self.push([rows, cols], data, false, Op::Leaf))
    }

    pub fn const_row(&mut self, data: &[f64]) -> Var {
        self.push([1, data.len()], data.to_vec(), false, Op::Leaf)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.push([1, 1], vec![x], false, Op::Leaf)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push([rows, cols], vec![0.0; rows * cols], false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).data
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.node(v).shape
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        debug_assert_eq!(self.node(v).shape, [1, 1]);
        self.node(v).data[0]
    }

    /// Gradient of the last `backward` target w.r.t. `v`; `None` before any
    /// backward pass has run.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        if self.ran_backward {
            Some(&self.node(v).grad)
        } else {
            None
        }
    }

    // ── elementwise and structural ops ──────────────────────────────────

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<[usize; 2], NumError> {
        let (sa, sb) = (self.node(a).shape, self.node(b).shape);
        if sa != sb {
            return Err(NumError::ShapeMismatch {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let shape = self.same_shape("add", a, b)?;
        let data = self
            .node(a)
            .data
            .iter()
            .zip(&self.node(b).data)
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(shape, data, self.rg(&[a, b]), Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let shape = self.same_shape("sub", a, b)?;
        let data = self
            .node(a)
            .data
            .iter()
            .zip(&self.node(b).data)
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(shape, data, self.rg(&[a, b]), Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let shape = self.same_shape("mul", a, b)?;
        let data = self
            .node(a)
            .data
            .iter()
            .zip(&self.node(b).data)
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(shape, data, self.rg(&[a, b]), Op::Mul(a, b)))
    }

    /// Adds a `1×c` row vector to every row of an `m×c` matrix.
    pub fn add_row(&mut self, m: Var, bias: Var) -> Result<Var, NumError> {
        let (sm, sb) = (self.node(m).shape, self.node(bias).shape);
        if sb[0] != 1 || sb[1] != sm[1] {
            return Err(NumError::ShapeMismatch {
                op: "add_row",
                lhs: sm,
                rhs: sb,
            });
        }
        let cols = sm[1];
        let mut data = self.node(m).data.clone();
        for (i, x) in data.iter_mut().enumerate() {
            *x += self.node(bias).data[i % cols];
        }
        Ok(self.push(sm, data, self.rg(&[m, bias]), Op::AddRow(m, bias)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        let (sa, sb) = (self.node(a).shape, self.node(b).shape);
        if sa[1] != sb[0] {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let data = mm_nn(&self.node(a).data, &self.node(b).data, sa[0], sa[1], sb[1]);
        Ok(self.push([sa[0], sb[1]], data, self.rg(&[a, b]), Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let [r, c] = self.node(a).shape;
        let src = &self.node(a).data;
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        let rg = self.node(a).requires_grad;
        self.push([c, r], data, rg, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NumError> {
        let n = self.node(a).data.len();
        if rows * cols != n {
            return Err(NumError::LengthMismatch {
                op: "reshape",
                len: n,
                shape: [rows, cols],
            });
        }
        let data = self.node(a).data.clone();
        let rg = self.node(a).requires_grad;
        Ok(self.push([rows, cols], data, rg, Op::Reshape(a)))
    }

    /// Horizontal concatenation: all inputs share a row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        if parts.is_empty() {
            return Err(NumError::EmptyInput { op: "concat_cols" });
        }
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        let rows = self.node(parts[0]).shape[0];
        let mut cols = 0;
        for p in parts {
            let s = self.node(*p).shape;
            if s[0] != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: [rows, cols],
                    rhs: s,
                });
            }
            cols += s[1];
        }
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0;
        for p in parts {
            let s = self.node(*p).shape;
            for i in 0..rows {
                let src = &self.node(*p).data[i * s[1]..(i + 1) * s[1]];
                data[i * cols + offset..i * cols + offset + s[1]].copy_from_slice(src);
            }
            offset += s[1];
        }
        Ok(self.push(
            [rows, cols],
            data,
            self.rg(parts),
            Op::ConcatCols(parts.to_vec()),
        ))
    }

    /// Vertical stack of `1×c` row vectors into an `m×c` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, NumError> {
        if rows.is_empty() {
            return Err(NumError::EmptyInput { op: "stack_rows" });
        }
        if rows.len() == 1 {
            return Ok(rows[0]);
        }
        let cols = self.node(rows[0]).shape[1];
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let s = self.node(*r).shape;
            if s != [1, cols] {
                return Err(NumError::ShapeMismatch {
                    op: "stack_rows",
                    lhs: [1, cols],
                    rhs: s,
                });
            }
            data.extend_from_slice(&self.node(*r).data);
        }
        Ok(self.push(
            [rows.len(), cols],
            data,
            self.rg(rows),
            Op::StackRows(rows.to_vec()),
        ))
    }

    pub fn slice_cols(&mut self, src: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let [r, c] = self.node(src).shape;
        if start + len > c || len == 0 {
            return Err(NumError::BadShape {
                op: "slice_cols",
                shape: [r, c],
                why: "column range out of bounds",
            });
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&self.node(src).data[i * c + start..i * c + start + len]);
        }
        let rg = self.node(src).requires_grad;
        Ok(self.push([r, len], data, rg, Op::SliceCols { src, start }))
    }

    /// Tiles a `1×c` row `times` times into a `times×c` matrix.
    pub fn repeat_rows(&mut self, src: Var, times: usize) -> Result<Var, NumError> {
        let s = self.node(src).shape;
        if s[0] != 1 {
            return Err(NumError::BadShape {
                op: "repeat_rows",
                shape: s,
                why: "expected a single row",
            });
        }
        if times == 0 {
            return Err(NumError::EmptyInput { op: "repeat_rows" });
        }
        if times == 1 {
            return Ok(src);
        }
        let mut data = Vec::with_capacity(times * s[1]);
        for _ in 0..times {
            data.extend_from_slice(&self.node(src).data);
        }
        let rg = self.node(src).requires_grad;
        Ok(self.push([times, s[1]], data, rg, Op::RepeatRows { src }))
    }

    // ── nonlinearities ───────────────────────────────────────────────────

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let shape = self.node(a).shape;
        let data = self.node(a).data.iter().map(|x| f(*x)).collect();
        let rg = self.node(a).requires_grad;
        self.push(shape, data, rg, op)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid_scalar, Op::Sigmoid(a))
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus_scalar, Op::Softplus(a))
    }

    pub fn log(&mut self, a: Var) -> Result<Var, NumError> {
        if let Some(bad) = self.node(a).data.iter().find(|x| **x <= 0.0) {
            return Err(NumError::LogDomain { value: *bad });
        }
        Ok(self.unary(a, f64::ln, Op::Log(a)))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, f64::cos, Op::Cos(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| c * x, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp { src: a, lo, hi })
    }

    /// Softmax along `axis` (0 = down columns, 1 = along rows) of a 2-d tensor.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, NumError> {
        if axis > 1 {
            return Err(NumError::BadAxis { axis });
        }
        let [r, c] = self.node(a).shape;
        let src = &self.node(a).data;
        let mut data = vec![0.0; r * c];
        let (lanes, lane_len, stride, base) = if axis == 1 {
            (r, c, 1, c)
        } else {
            (c, r, c, 1)
        };
        for lane in 0..lanes {
            let idx = |i: usize| lane * base + i * stride;
            let mut mx = f64::NEG_INFINITY;
            for i in 0..lane_len {
                mx = mx.max(src[idx(i)]);
            }
            let mut denom = 0.0;
            for i in 0..lane_len {
                let e = (src[idx(i)] - mx).exp();
                data[idx(i)] = e;
                denom += e;
            }
            for i in 0..lane_len {
                data[idx(i)] /= denom;
            }
        }
        let rg = self.node(a).requires_grad;
        Ok(self.push([r, c], data, rg, Op::Softmax { src: a, axis }))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s: f64 = self.node(a).data.iter().sum();
        let rg = self.node(a).requires_grad;
        self.push([1, 1], vec![s], rg, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.node(a).data.len() as f64;
        let s: f64 = self.node(a).data.iter().sum();
        let rg = self.node(a).requires_grad;
        self.push([1, 1], vec![s / n], rg, Op::MeanAll(a))
    }

    /// Inverted dropout: kept entries are scaled by `1/(1-rate)` during
    /// training; with `rate == 0` or outside training this is the identity
    /// (the input var is returned unchanged).
    pub fn dropout(
        &mut self,
        a: Var,
        rate: f64,
        training: bool,
        noise: &mut NoiseSource,
    ) -> Result<Var, NumError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumError::BadDropoutRate { rate });
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.node(a).data.len())
            .map(|_| if noise.uniform() < rate { 0.0 } else { keep })
            .collect();
        let shape = self.node(a).shape;
        let data = self
            .node(a)
            .data
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        let rg = self.node(a).requires_grad;
        Ok(self.push(shape, data, rg, Op::Dropout { src: a, mask }))
    }

    // ── backward ─────────────────────────────────────────────────────────

    fn add_grad(&mut self, v: Var, g: &[f64]) {
        let dst = &mut self.nodes[v.0].grad;
        for (d, x) in dst.iter_mut().zip(g) {
            *d += x;
        }
    }

    /// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate
    /// across repeated calls; intermediate gradients are reset per sweep.
    pub fn backward(&mut self, loss: Var) -> Result<(), NumError> {
        let shape = self.node(loss).shape;
        if shape != [1, 1] {
            return Err(NumError::NonScalarLoss { shape });
        }
        for node in &mut self.nodes {
            if !matches!(node.op, Op::Leaf) {
                node.grad.iter_mut().for_each(|g| *g = 0.0);
            }
        }
        self.nodes[loss.0].grad[0] += 1.0;
        self.ran_backward = true;

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let g = self.nodes[i].grad.clone();
            match op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.add_grad(a, &g);
                    self.add_grad(b, &g);
                }
                Op::Sub(a, b) => {
                    self.add_grad(a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    self.add_grad(b, &neg);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(&self.node(b).data).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(&self.node(a).data).map(|(x, y)| x * y).collect();
                    self.add_grad(a, &ga);
                    self.add_grad(b, &gb);
                }
                Op::AddRow(m, bias) => {
                    self.add_grad(m, &g);
                    let cols = self.node(bias).shape[1];
                    let mut gb = vec![0.0; cols];
                    for (i, x) in g.iter().enumerate() {
                        gb[i % cols] += x;
                    }
                    self.add_grad(bias, &gb);
                }
                Op::MatMul(a, b) => {
                    let [m, k] = self.node(a).shape;
                    let n = self.node(b).shape[1];
                    let ga = mm_nt(&g, &self.node(b).data, m, n, k);
                    let gb = mm_tn(&self.node(a).data, &g, m, k, n);
                    self.add_grad(a, &ga);
                    self.add_grad(b, &gb);
                }
                Op::Transpose(a) => {
                    let [r, c] = self.node(a).shape;
                    let mut ga = vec![0.0; r * c];
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] = g[j * r + i];
                        }
                    }
                    self.add_grad(a, &ga);
                }
                Op::Reshape(a) => self.add_grad(a, &g),
                Op::ConcatCols(parts) => {
                    let rows = self.nodes[i].shape[0];
                    let cols = self.nodes[i].shape[1];
                    let mut offset = 0;
                    for p in parts {
                        let w = self.node(p).shape[1];
                        let mut gp = vec![0.0; rows * w];
                        for r in 0..rows {
                            gp[r * w..(r + 1) * w]
                                .copy_from_slice(&g[r * cols + offset..r * cols + offset + w]);
                        }
                        self.add_grad(p, &gp);
                        offset += w;
                    }
                }
                Op::StackRows(rows) => {
                    let cols = self.nodes[i].shape[1];
                    for (r, v) in rows.iter().enumerate() {
                        self.add_grad(*v, &g[r * cols..(r + 1) * cols]);
                    }
                }
                Op::SliceCols { src, start } => {
                    let [r, c] = self.node(src).shape;
                    let len = self.nodes[i].shape[1];
                    let mut gs = vec![0.0; r * c];
                    for row in 0..r {
                        gs[row * c + start..row * c + start + len]
                            .copy_from_slice(&g[row * len..(row + 1) * len]);
                    }
                    self.add_grad(src, &gs);
                }
                Op::RepeatRows { src } => {
                    let cols = self.node(src).shape[1];
                    let times = self.nodes[i].shape[0];
                    let mut gs = vec![0.0; cols];
                    for r in 0..times {
                        for j in 0..cols {
                            gs[j] += g[r * cols + j];
                        }
                    }
                    self.add_grad(src, &gs);
                }
                Op::Relu(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.node(a).data)
                        .map(|(gi, x)| if *x > 0.0 { *gi } else { 0.0 })
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].data)
                        .map(|(gi, y)| gi * y * (1.0 - y))
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Softplus(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.node(a).data)
                        .map(|(gi, x)| gi * sigmoid_scalar(*x))
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Log(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.node(a).data)
                        .map(|(gi, x)| gi / x)
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Exp(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[i].data)
                        .map(|(gi, y)| gi * y)
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Cos(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.node(a).data)
                        .map(|(gi, x)| -gi * x.sin())
                        .collect();
                    self.add_grad(a, &ga);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|gi| gi * c).collect();
                    self.add_grad(a, &ga);
                }
                Op::Softmax { src, axis } => {
                    let [r, c] = self.nodes[i].shape;
                    let y = &self.nodes[i].data;
                    let mut gs = vec![0.0; r * c];
                    let (lanes, lane_len, stride, base) = if axis == 1 {
                        (r, c, 1, c)
                    } else {
                        (c, r, c, 1)
                    };
                    for lane in 0..lanes {
                        let idx = |i: usize| lane * base + i * stride;
                        let dot: f64 = (0..lane_len).map(|i| g[idx(i)] * y[idx(i)]).sum();
                        for i in 0..lane_len {
                            gs[idx(i)] = y[idx(i)] * (g[idx(i)] - dot);
                        }
                    }
                    self.add_grad(src, &gs);
                }
                Op::SumAll(a) => {
                    let ga = vec![g[0]; self.node(a).data.len()];
                    self.add_grad(a, &ga);
                }
                Op::MeanAll(a) => {
                    let n = self.node(a).data.len();
                    let ga = vec![g[0] / n as f64; n];
                    self.add_grad(a, &ga);
                }
                Op::Dropout { src, mask } => {
                    let ga: Vec<f64> = g.iter().zip(&mask).map(|(gi, m)| gi * m).collect();
                    self.add_grad(src, &ga);
                }
                Op::Clamp { src, lo, hi } => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.node(src).data)
                        .map(|(gi, x)| if *x >= lo && *x <= hi { *gi } else { 0.0 })
                        .collect();
                    self.add_grad(src, &ga);
                }
            }
        }
        Ok(())
    }
}
