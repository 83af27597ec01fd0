//! Reverse-mode differentiation on a tape of dense `f64` tensors.
//!
//! Values are recorded once and never mutated. Parameters are leaves tagged
//! with a name; [`Tape::backward`] returns one gradient per name (summed if a
//! name was registered more than once, which is how weight sharing works).

mod optim;
mod sparse;

pub use optim::{adam_step, grad_check, load_params, params_from_json, params_to_json, save_params, sgd_step, AdamConfig, AdamState, GradCheckReport};
pub use sparse::SparseMat;

use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AutogradError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("axis {axis} out of range for rank {rank}")]
    BadAxis { axis: usize, rank: usize },
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

type Result<T> = std::result::Result<T, AutogradError>;

fn mismatch(msg: String) -> AutogradError {
    AutogradError::ShapeMismatch(msg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    #[serde(rename = "values")]
    pub data: Vec<f64>,
}

pub type Params = BTreeMap<String, Tensor>;

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(mismatch(format!("{} values for shape {shape:?}", data.len())));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Tensor {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { shape: vec![], data: vec![v] }
    }

    pub fn matrix(rows: &[Vec<f64>]) -> Result<Tensor> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(mismatch("ragged rows".into()));
        }
        Ok(Tensor { shape: vec![rows.len(), cols], data: rows.concat() })
    }

    pub fn eye(n: usize) -> Tensor {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Size of the last axis (1 for scalars).
    pub fn cols(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Relu(Var),
    Abs(Var),
    SumAll(Var),
    SumAxis { x: Var, axis: usize },
    MeanAxis { x: Var, axis: usize },
    BroadcastAxis { x: Var, axis: usize },
    Transpose { x: Var, a: usize, b: usize },
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Spmm { s: Rc<SparseMat>, x: Var },
    Reshape(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    param: Option<String>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// `(outer, len, inner)` split of a shape around `axis`.
fn split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (shape[..axis].iter().product(), shape[axis], shape[axis + 1..].iter().product())
}

/// `c[m,n] (+)= a[m,k] * b[k,n]` with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: isize, csa: isize, b: &[f64], rsb: isize, csb: isize, c: &mut [f64], beta: f64) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if beta == 0.0 {
            c[..m * n].fill(0.0);
        }
        return;
    }
    // SAFETY: strides describe in-bounds row-major layouts of the given slices.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
    }
}

fn transpose_index(shape: &[usize], a: usize, b: usize) -> (Vec<usize>, Vec<usize>) {
    let mut out_shape = shape.to_vec();
    out_shape.swap(a, b);
    let rank = shape.len();
    let mut strides = vec![1; rank];
    for p in (0..rank.saturating_sub(1)).rev() {
        strides[p] = strides[p + 1] * shape[p + 1];
    }
    let mut src_strides = strides.clone();
    src_strides.swap(a, b);
    // map output flat index -> input flat index
    let total: usize = shape.iter().product();
    let mut map = vec![0; total];
    let mut idx = vec![0; rank];
    for (o, slot) in map.iter_mut().enumerate() {
        let mut rem = o;
        for p in (0..rank).rev() {
            idx[p] = rem % out_shape[p];
            rem /= out_shape[p];
        }
        *slot = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
    }
    (out_shape, map)
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op, param: None });
        Var(self.nodes.len() - 1)
    }

    /// Smallest nonzero `|input|` over every relu and abs on the tape, or
    /// infinity if there is none. Finite differences with a step well below
    /// this margin cannot cross a kink. Exact zeros are skipped: they come
    /// from structurally empty rows that no parameter reaches.
    pub fn kink_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) | Op::Abs(x) => Some(x),
                _ => None,
            })
            .flat_map(|x| self.value(x).data.iter())
            .filter(|v| **v != 0.0)
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].value.shape
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, name: &str, t: &Tensor) -> Var {
        let v = self.push(t.clone(), Op::Leaf);
        self.nodes[v.0].param = Some(name.to_string());
        v
    }

    /// Registers `params[name]`.
    pub fn param_from(&mut self, params: &Params, name: &str) -> Result<Var> {
        let t = params.get(name).ok_or_else(|| AutogradError::UnknownParam(name.to_string()))?;
        Ok(self.param(name, t))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(format!("{what}: {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data.iter().zip(&y.data).map(|(&p, &q)| f(p, q)).collect();
        let t = Tensor { shape: x.shape.clone(), data };
        Ok(self.push(t, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "sub", |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |p, q| p * q, Op::Mul(a, b))
    }

    /// Left-to-right sum of equally shaped values.
    pub fn add_all(&mut self, vs: &[Var]) -> Result<Var> {
        let (&first, rest) = vs.split_first().ok_or_else(|| mismatch("empty sum".into()))?;
        rest.iter().try_fold(first, |acc, &v| self.add(acc, v))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|a| a * c).collect() };
        self.push(t, Op::Scale(x, c))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect() };
        self.push(t, Op::Relu(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let t = Tensor { shape: v.shape.clone(), data: v.data.iter().map(|a| a.abs()).collect() };
        self.push(t, Op::Abs(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(x))
    }

    /// `a[m,k] * b[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(mismatch(format!("matmul {sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.value(a).data, k as isize, 1, &self.value(b).data, n as isize, 1, &mut out, 0.0);
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, Op::MatMul(a, b)))
    }

    /// `x[m,in] * w[out,in]^T + b[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.len() != 2 || sw.len() != 2 || sx[1] != sw[1] {
            return Err(mismatch(format!("linear {sx:?} with weight {sw:?}")));
        }
        let (m, k, n) = (sx[0], sx[1], sw[0]);
        let mut out = vec![0.0; m * n];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.shape != [n] {
                return Err(mismatch(format!("bias {:?} for width {n}", bv.shape)));
            }
            for row in out.chunks_mut(n.max(1)) {
                row.copy_from_slice(&bv.data);
            }
        }
        gemm(m, k, n, &self.value(x).data, k as isize, 1, &self.value(w).data, 1, k as isize, &mut out, if b.is_some() { 1.0 } else { 0.0 });
        Ok(self.push(Tensor { shape: vec![m, n], data: out }, Op::Linear { x, w, b }))
    }

    fn check_axis(&self, x: Var, axis: usize) -> Result<()> {
        let rank = self.shape(x).len();
        if axis >= rank {
            return Err(AutogradError::BadAxis { axis, rank });
        }
        Ok(())
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis(x, axis)?;
        let t = reduce_axis(self.value(x), axis, 1.0);
        Ok(self.push(t, Op::SumAxis { x, axis }))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.check_axis(x, axis)?;
        let len = self.shape(x)[axis];
        let t = reduce_axis(self.value(x), axis, if len == 0 { 0.0 } else { 1.0 / len as f64 });
        Ok(self.push(t, Op::MeanAxis { x, axis }))
    }

    /// Inserts a new axis of size `len` at `axis`, repeating values along it.
    pub fn broadcast_axis(&mut self, x: Var, axis: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis > shape.len() {
            return Err(AutogradError::BadAxis { axis, rank: shape.len() });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis..].iter().product();
        let src = &self.value(x).data;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            for _ in 0..len {
                data.extend_from_slice(&src[o * inner..(o + 1) * inner]);
            }
        }
        let mut out_shape = shape;
        out_shape.insert(axis, len);
        Ok(self.push(Tensor { shape: out_shape, data }, Op::BroadcastAxis { x, axis }))
    }

    /// Swaps two axes.
    pub fn transpose(&mut self, x: Var, a: usize, b: usize) -> Result<Var> {
        self.check_axis(x, a)?;
        self.check_axis(x, b)?;
        let (shape, map) = transpose_index(self.shape(x), a, b);
        let src = &self.value(x).data;
        let data = map.iter().map(|&i| src[i]).collect();
        Ok(self.push(Tensor { shape, data }, Op::Transpose { x, a, b }))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = xs.first().ok_or_else(|| mismatch("empty concat".into()))?;
        let lead = self.shape(*first)[..self.shape(*first).len().saturating_sub(1)].to_vec();
        let mut widths = Vec::new();
        for &x in xs {
            let s = self.shape(x);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return Err(mismatch(format!("concat of {s:?} with leading {lead:?}")));
            }
            widths.push(*s.last().unwrap_or(&1));
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = vec![0.0; rows * total];
        let mut off = 0;
        for (&x, &w) in xs.iter().zip(&widths) {
            let src = &self.value(x).data;
            for r in 0..rows {
                data[r * total + off..r * total + off + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            off += w;
        }
        let mut shape = lead;
        shape.push(total);
        Ok(self.push(Tensor { shape, data }, Op::Concat(xs.to_vec())))
    }

    /// Channels `start..end` of the last axis.
    pub fn slice(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let c = *shape.last().ok_or_else(|| mismatch("slice of a scalar".into()))?;
        if start > end || end > c {
            return Err(mismatch(format!("slice {start}..{end} of width {c}")));
        }
        let w = end - start;
        let rows = shape[..shape.len() - 1].iter().product::<usize>();
        let src = &self.value(x).data;
        let mut data = Vec::with_capacity(rows * w);
        for r in 0..rows {
            data.extend_from_slice(&src[r * c + start..r * c + end]);
        }
        let mut out_shape = shape;
        *out_shape.last_mut().expect("nonempty") = w;
        Ok(self.push(Tensor { shape: out_shape, data }, Op::Slice { x, start }))
    }

    /// `s * x` for a constant sparse `s` and `x[rows, d]`.
    pub fn spmm(&mut self, s: &Rc<SparseMat>, x: Var) -> Result<Var> {
        let shape = self.shape(x);
        if shape.len() != 2 || shape[0] != s.cols {
            return Err(mismatch(format!("sparse {}x{} times {shape:?}", s.rows, s.cols)));
        }
        let d = shape[1];
        let data = s.apply(&self.value(x).data, d);
        Ok(self.push(Tensor { shape: vec![s.rows, d], data }, Op::Spmm { s: Rc::clone(s), x }))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x);
        if shape.iter().product::<usize>() != v.len() {
            return Err(mismatch(format!("reshape {:?} to {shape:?}", v.shape)));
        }
        let t = Tensor { shape: shape.to_vec(), data: v.data.clone() };
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Gradients of the scalar `loss` with respect to every named parameter.
    pub fn backward(&self, loss: Var) -> Result<Params> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutogradError::NotScalar(lv.shape.clone()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Params::new();
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let mut acc = |v: Var, delta: Vec<f64>| accumulate(&mut grads, v, delta);
            match &node.op {
                Op::Leaf => {
                    if let Some(name) = &node.param {
                        match out.get_mut(name) {
                            Some(t) => t.data.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            None => {
                                out.insert(name.clone(), Tensor { shape: node.value.shape.clone(), data: g });
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.iter().map(|v| -v).collect());
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.value(*a).data, &self.value(*b).data);
                    acc(*a, g.iter().zip(vb).map(|(x, y)| x * y).collect());
                    acc(*b, g.iter().zip(va).map(|(x, y)| x * y).collect());
                }
                Op::Scale(x, c) => acc(*x, g.iter().map(|v| v * c).collect()),
                Op::MatMul(a, b) => {
                    let (sa, sb) = (&self.value(*a).shape, &self.value(*b).shape);
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, &g, n as isize, 1, &self.value(*b).data, 1, n as isize, &mut da, 0.0);
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, &self.value(*a).data, 1, k as isize, &g, n as isize, 1, &mut db, 0.0);
                    acc(*a, da);
                    acc(*b, db);
                }
                Op::Linear { x, w, b } => {
                    let (sx, sw) = (&self.value(*x).shape, &self.value(*w).shape);
                    let (m, k, n) = (sx[0], sx[1], sw[0]);
                    if let Some(b) = b {
                        let mut db = vec![0.0; n];
                        for row in g.chunks(n.max(1)) {
                            db.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                        }
                        acc(*b, db);
                    }
                    let mut dx = vec![0.0; m * k];
                    gemm(m, n, k, &g, n as isize, 1, &self.value(*w).data, k as isize, 1, &mut dx, 0.0);
                    let mut dw = vec![0.0; n * k];
                    gemm(n, m, k, &g, 1, n as isize, &self.value(*x).data, k as isize, 1, &mut dw, 0.0);
                    acc(*x, dx);
                    acc(*w, dw);
                }
                Op::Relu(x) => {
                    let v = &self.value(*x).data;
                    acc(*x, g.iter().zip(v).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect());
                }
                Op::Abs(x) => {
                    let v = &self.value(*x).data;
                    acc(*x, g.iter().zip(v).map(|(d, a)| if *a > 0.0 { *d } else if *a < 0.0 { -d } else { 0.0 }).collect());
                }
                Op::SumAll(x) => acc(*x, vec![g[0]; self.value(*x).len()]),
                Op::SumAxis { x, axis } | Op::MeanAxis { x, axis } => {
                    let shape = &self.value(*x).shape;
                    let (outer, len, inner) = split(shape, *axis);
                    let c = match node.op {
                        Op::MeanAxis { .. } if len > 0 => 1.0 / len as f64,
                        _ => 1.0,
                    };
                    let mut dx = vec![0.0; outer * len * inner];
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                dx[(o * len + l) * inner + i] = c * g[o * inner + i];
                            }
                        }
                    }
                    acc(*x, dx);
                }
                Op::BroadcastAxis { x, axis } => {
                    let (outer, len, inner) = split(&node.value.shape, *axis);
                    let mut dx = vec![0.0; outer * inner];
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                dx[o * inner + i] += g[(o * len + l) * inner + i];
                            }
                        }
                    }
                    acc(*x, dx);
                }
                Op::Transpose { x, a, b } => {
                    let (_, map) = transpose_index(&self.value(*x).shape, *a, *b);
                    let mut dx = vec![0.0; g.len()];
                    for (o, &i) in map.iter().enumerate() {
                        dx[i] = g[o];
                    }
                    acc(*x, dx);
                }
                Op::Concat(xs) => {
                    let total = node.value.cols();
                    let rows = node.value.len() / total.max(1);
                    let mut off = 0;
                    for &x in xs {
                        let w = self.value(x).cols();
                        let mut dx = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            dx.extend_from_slice(&g[r * total + off..r * total + off + w]);
                        }
                        acc(x, dx);
                        off += w;
                    }
                }
                Op::Slice { x, start } => {
                    let c = self.value(*x).cols();
                    let w = node.value.cols();
                    let rows = self.value(*x).len() / c.max(1);
                    let mut dx = vec![0.0; rows * c];
                    for r in 0..rows {
                        dx[r * c + start..r * c + start + w].copy_from_slice(&g[r * w..(r + 1) * w]);
                    }
                    acc(*x, dx);
                }
                Op::Spmm { s, x } => {
                    let d = node.value.cols();
                    acc(*x, s.apply_transpose(&g, d));
                }
                Op::Reshape(x) => acc(*x, g),
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>) {
    match &mut grads[v.0] {
        Some(g) => g.iter_mut().zip(&delta).for_each(|(a, b)| *a += b),
        slot => *slot = Some(delta),
    }
}

fn reduce_axis(t: &Tensor, axis: usize, c: f64) -> Tensor {
    let (outer, len, inner) = split(&t.shape, axis);
    let mut data = vec![0.0; outer * inner];
    for o in 0..outer {
        for l in 0..len {
            for i in 0..inner {
                data[o * inner + i] += t.data[(o * len + l) * inner + i];
            }
        }
    }
    if c != 1.0 {
        data.iter_mut().for_each(|v| *v *= c);
    }
    let mut shape = t.shape.clone();
    shape.remove(axis);
    Tensor { shape, data }
}
