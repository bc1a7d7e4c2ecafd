//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its forward value. Nodes are appended in evaluation order, so parents
//! always precede children and [`Tape::backward`] can visit the nodes once in
//! reverse. Trainable values live in a [`ParamStore`] outside the tape; a
//! forward pass binds them with [`Tape::param`] and the resulting
//! [`Gradients`] are folded back with [`Gradients::accumulate_into`].

use crate::error::{Error, Result};
use crate::numerics::mat::Mat;

/// Denominator clamp for rows whose norm vanishes in [`Tape::l2_normalize_rows`].
pub const EPS_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Mat,
    pub grad: Mat,
}

/// Owns every trainable matrix of a model.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let grad = Mat::zeros(value.rows(), value.cols());
        self.params.push(Param {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Mat {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    /// Total number of scalar entries across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

/// Elementwise operation kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ew {
    Add,
    Sub,
    Mul,
    Scale(f64),
    Sigmoid,
    Relu,
    Tanh,
    Exp,
    Neg,
}

impl Ew {
    fn is_binary(self) -> bool {
        matches!(self, Ew::Add | Ew::Sub | Ew::Mul)
    }

    fn name(self) -> &'static str {
        match self {
            Ew::Add => "add",
            Ew::Sub => "sub",
            Ew::Mul => "mul",
            Ew::Scale(_) => "scale",
            Ew::Sigmoid => "sigmoid",
            Ew::Relu => "relu",
            Ew::Tanh => "tanh",
            Ew::Exp => "exp",
            Ew::Neg => "neg",
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Binary(Ew, Var, Var),
    Unary(Ew, Var),
    Affine(Var, f64),
    ScaleBy(Var, Var),
    AddRowBias(Var, Var),
    Clamp(Var, f64, f64),
    Transpose(Var),
    Sum(Var),
    L2NormalizeRows {
        m: Var,
        s: Var,
        denoms: Vec<f64>,
    },
    MaskedSoftmaxColumns(Var),
    ConcatCols(Var, Var),
    MeanStack(Vec<Var>),
    Bce {
        logits: Var,
        targets: Mat,
        pairs: Vec<(usize, usize)>,
        pos_weight: f64,
    },
}

struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

/// Records one forward pass. Single-threaded by construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
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

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Constant, false, "constant")
            .expect("constant must be finite")
    }

    /// Records a value that is a differentiable leaf but not a stored parameter.
    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Constant, true, "leaf")
            .expect("leaf must be finite")
    }

    /// Binds a stored parameter. Repeated binds of the same id share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if self.bound.len() <= id.0 {
            self.bound.resize(id.0 + 1, None);
        }
        if let Some(v) = self.bound[id.0] {
            return v;
        }
        let v = self
            .push(store.value(id).clone(), Op::Param(id), true, "param")
            .expect("parameter must be finite");
        self.bound[id.0] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.requires(a) || self.requires(b);
        self.push(out, Op::MatMul(a, b), rg, "matmul")
    }

    /// Elementwise operation; `b` is required for the binary kinds and ignored otherwise.
    pub fn ew(&mut self, kind: Ew, a: Var, b: Option<Var>) -> Result<Var> {
        if kind.is_binary() {
            let b = b.ok_or_else(|| Error::Config(format!("{} needs two operands", kind.name())))?;
            let (x, y) = (self.value(a), self.value(b));
            x.same_shape(y, kind.name())?;
            let out = match kind {
                Ew::Add => x.zip_map(y, |p, q| p + q),
                Ew::Sub => x.zip_map(y, |p, q| p - q),
                _ => x.zip_map(y, |p, q| p * q),
            };
            let rg = self.requires(a) || self.requires(b);
            return self.push(out, Op::Binary(kind, a, b), rg, kind.name());
        }
        let x = self.value(a);
        let out = match kind {
            Ew::Scale(k) => x.scale(k),
            Ew::Sigmoid => x.map(sigmoid),
            Ew::Relu => x.map(|v| v.max(0.0)),
            Ew::Tanh => x.map(f64::tanh),
            Ew::Exp => x.map(f64::exp),
            Ew::Neg => x.map(|v| -v),
            _ => unreachable!(),
        };
        let rg = self.requires(a);
        self.push(out, Op::Unary(kind, a), rg, kind.name())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(Ew::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(Ew::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(Ew::Mul, a, Some(b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.ew(Ew::Scale(k), a, None)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.ew(Ew::Sigmoid, a, None)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.ew(Ew::Relu, a, None)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.ew(Ew::Tanh, a, None)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.ew(Ew::Exp, a, None)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.ew(Ew::Neg, a, None)
    }

    /// `mul * a + add`, elementwise.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Result<Var> {
        let out = self.value(a).map(|v| mul * v + add);
        let rg = self.requires(a);
        self.push(out, Op::Affine(a, mul), rg, "affine")
    }

    /// `k - a`, elementwise.
    pub fn rsub_const(&mut self, k: f64, a: Var) -> Result<Var> {
        self.affine(a, -1.0, k)
    }

    /// Multiplies every entry of `a` by the 1x1 node `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(Error::Dimension {
                op: "scale_by",
                lhs: self.shape(a),
                rhs: self.shape(s),
            });
        }
        let k = self.value(s).item();
        let out = self.value(a).scale(k);
        let rg = self.requires(a) || self.requires(s);
        self.push(out, Op::ScaleBy(a, s), rg, "scale_by")
    }

    /// Adds the 1xC row `bias` to every row of `a`.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (x, b) = (self.value(a), self.value(bias));
        if b.rows() != 1 || b.cols() != x.cols() {
            return Err(Error::Dimension {
                op: "add_row_bias",
                lhs: x.shape(),
                rhs: b.shape(),
            });
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, bv) in out.row_mut(i).iter_mut().zip(b.as_slice()) {
                *o += bv;
            }
        }
        let rg = self.requires(a) || self.requires(bias);
        self.push(out, Op::AddRowBias(a, bias), rg, "add_row_bias")
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let out = self.value(a).map(|v| v.clamp(lo, hi));
        let rg = self.requires(a);
        self.push(out, Op::Clamp(a, lo, hi), rg, "clamp")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        let rg = self.requires(a);
        self.push(out, Op::Transpose(a), rg, "transpose")
    }

    /// Sum of all entries as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Mat::scalar(self.value(a).sum());
        let rg = self.requires(a);
        self.push(out, Op::Sum(a), rg, "sum")
    }

    /// `a · aᵀ`.
    pub fn gram(&mut self, a: Var) -> Result<Var> {
        let t = self.transpose(a)?;
        self.matmul(a, t)
    }

    /// Row i of the output is `s · m_i / max(‖m_i‖₂, EPS_NORM)`.
    pub fn l2_normalize_rows(&mut self, m: Var, s: Var) -> Result<Var> {
        if self.shape(s) != (1, 1) {
            return Err(Error::Dimension {
                op: "l2_normalize_rows",
                lhs: self.shape(m),
                rhs: self.shape(s),
            });
        }
        let x = self.value(m);
        if x.is_empty() {
            return Err(Error::Dimension {
                op: "l2_normalize_rows",
                lhs: x.shape(),
                rhs: (1, 1),
            });
        }
        let k = self.value(s).item();
        let mut out = x.clone();
        let mut denoms = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = norm.max(EPS_NORM);
            denoms.push(d);
            for v in out.row_mut(i) {
                *v *= k / d;
            }
        }
        let rg = self.requires(m) || self.requires(s);
        self.push(out, Op::L2NormalizeRows { m, s, denoms }, rg, "l2_normalize_rows")
    }

    /// Column-wise softmax over the entries where `mask` is 1. Masked-out
    /// entries are exactly zero and a fully masked column is all zeros.
    pub fn masked_softmax_columns(&mut self, values: Var, mask: &Mat) -> Result<Var> {
        let x = self.value(values);
        x.same_shape(mask, "masked_softmax_columns")?;
        let (rows, cols) = x.shape();
        let mut out = Mat::zeros(rows, cols);
        for j in 0..cols {
            let mut max = f64::NEG_INFINITY;
            for i in 0..rows {
                if mask[(i, j)] != 0.0 {
                    max = max.max(x[(i, j)]);
                }
            }
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for i in 0..rows {
                if mask[(i, j)] != 0.0 {
                    let e = (x[(i, j)] - max).exp();
                    out[(i, j)] = e;
                    total += e;
                }
            }
            for i in 0..rows {
                out[(i, j)] /= total;
            }
        }
        let rg = self.requires(values);
        self.push(out, Op::MaskedSoftmaxColumns(values), rg, "masked_softmax_columns")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.rows() != y.rows() {
            return Err(Error::Dimension {
                op: "concat_cols",
                lhs: x.shape(),
                rhs: y.shape(),
            });
        }
        let mut out = Mat::zeros(x.rows(), x.cols() + y.cols());
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            row[..x.cols()].copy_from_slice(x.row(i));
            row[x.cols()..].copy_from_slice(y.row(i));
        }
        let rg = self.requires(a) || self.requires(b);
        self.push(out, Op::ConcatCols(a, b), rg, "concat_cols")
    }

    /// Entrywise arithmetic mean of equally shaped nodes.
    pub fn mean_stack(&mut self, items: &[Var]) -> Result<Var> {
        let first = *items
            .first()
            .ok_or_else(|| Error::Config("mean_stack of an empty list".into()))?;
        let mut acc = self.value(first).clone();
        for &v in &items[1..] {
            let m = self.value(v);
            acc.same_shape(m, "mean_stack")?;
            acc.add_assign(m);
        }
        let out = acc.scale(1.0 / items.len() as f64);
        let rg = items.iter().any(|&v| self.requires(v));
        self.push(out, Op::MeanStack(items.to_vec()), rg, "mean_stack")
    }

    /// Mean binary cross-entropy with logits over the `(i, j)` entries where
    /// `mask` is nonzero, in the overflow-free form. `pos_weight` scales the
    /// positive-class term (1.0 = unweighted).
    pub fn bce_with_logits(&mut self, logits: Var, targets: &Mat, mask: &Mat, pos_weight: f64) -> Result<Var> {
        let x = self.value(logits);
        x.same_shape(targets, "bce_with_logits")?;
        x.same_shape(mask, "bce_with_logits")?;
        let mut pairs = Vec::new();
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                if mask[(i, j)] != 0.0 {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::Config("bce_with_logits over an empty mask".into()));
        }
        let mut total = 0.0;
        for &(i, j) in &pairs {
            total += bce_term(x[(i, j)], targets[(i, j)], pos_weight);
        }
        let out = Mat::scalar(total / pairs.len() as f64);
        let rg = self.requires(logits);
        self.push(
            out,
            Op::Bce {
                logits,
                targets: targets.clone(),
                pairs,
                pos_weight,
            },
            rg,
            "bce_with_logits",
        )
    }

    /// Propagates d(loss)/d(node) to every node that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant | Op::Param(_) => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.requires(*a) {
                        let ga = g.matmul_t(self.value(*b))?;
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.requires(*b) {
                        let gb = self.value(*a).t_matmul(&g)?;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Binary(kind, a, b) => {
                    let (ga, gb) = match kind {
                        Ew::Add => (g.clone(), g),
                        Ew::Sub => (g.clone(), g.scale(-1.0)),
                        Ew::Mul => (
                            g.zip_map(self.value(*b), |p, q| p * q),
                            g.zip_map(self.value(*a), |p, q| p * q),
                        ),
                        _ => unreachable!(),
                    };
                    if self.requires(*a) {
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.requires(*b) {
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::Unary(kind, a) => {
                    let y = &node.value;
                    let ga = match kind {
                        Ew::Scale(k) => g.scale(*k),
                        Ew::Sigmoid => g.zip_map(y, |p, s| p * s * (1.0 - s)),
                        Ew::Relu => g.zip_map(self.value(*a), |p, x| if x > 0.0 { p } else { 0.0 }),
                        Ew::Tanh => g.zip_map(y, |p, t| p * (1.0 - t * t)),
                        Ew::Exp => g.zip_map(y, |p, e| p * e),
                        Ew::Neg => g.scale(-1.0),
                        _ => unreachable!(),
                    };
                    accumulate(&mut grads, *a, ga);
                }
                Op::Affine(a, k) => accumulate(&mut grads, *a, g.scale(*k)),
                Op::ScaleBy(a, s) => {
                    if self.requires(*a) {
                        let k = self.value(*s).item();
                        accumulate(&mut grads, *a, g.scale(k));
                    }
                    if self.requires(*s) {
                        let gs: f64 = g
                            .as_slice()
                            .iter()
                            .zip(self.value(*a).as_slice())
                            .map(|(p, x)| p * x)
                            .sum();
                        accumulate(&mut grads, *s, Mat::scalar(gs));
                    }
                }
                Op::AddRowBias(a, bias) => {
                    if self.requires(*bias) {
                        let mut gb = Mat::zeros(1, g.cols());
                        for i in 0..g.rows() {
                            for (o, v) in gb.as_mut_slice().iter_mut().zip(g.row(i)) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads, *bias, gb);
                    }
                    if self.requires(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    let ga = g.zip_map(self.value(*a), |p, x| if x >= *lo && x <= *hi { p } else { 0.0 });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads, *a, Mat::filled(r, c, g.item()));
                }
                Op::L2NormalizeRows { m, s, denoms } => {
                    let x = self.value(*m);
                    let k = self.value(*s).item();
                    if self.requires(*m) {
                        let mut gm = Mat::zeros(x.rows(), x.cols());
                        for (i, &d) in denoms.iter().enumerate() {
                            let xr = x.row(i);
                            let gr = g.row(i);
                            let out = gm.row_mut(i);
                            if d > EPS_NORM {
                                // d/dx (k x / ‖x‖) = k/‖x‖ (I - x xᵀ/‖x‖²)
                                let proj = crate::numerics::mat::dot(gr, xr) / (d * d);
                                for c in 0..xr.len() {
                                    out[c] = k / d * (gr[c] - proj * xr[c]);
                                }
                            } else {
                                for c in 0..xr.len() {
                                    out[c] = k / d * gr[c];
                                }
                            }
                        }
                        accumulate(&mut grads, *m, gm);
                    }
                    if self.requires(*s) {
                        let mut gs = 0.0;
                        for (i, &d) in denoms.iter().enumerate() {
                            gs += crate::numerics::mat::dot(g.row(i), x.row(i)) / d;
                        }
                        accumulate(&mut grads, *s, Mat::scalar(gs));
                    }
                }
                Op::MaskedSoftmaxColumns(a) => {
                    let y = &node.value;
                    let (rows, cols) = y.shape();
                    let mut ga = Mat::zeros(rows, cols);
                    for j in 0..cols {
                        let mut inner = 0.0;
                        for i in 0..rows {
                            inner += y[(i, j)] * g[(i, j)];
                        }
                        for i in 0..rows {
                            ga[(i, j)] = y[(i, j)] * (g[(i, j)] - inner);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.shape(*a).1;
                    if self.requires(*a) {
                        let ga = Mat::from_fn(g.rows(), ca, |i, j| g[(i, j)]);
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.requires(*b) {
                        let gb = Mat::from_fn(g.rows(), g.cols() - ca, |i, j| g[(i, ca + j)]);
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::MeanStack(items) => {
                    let share = g.scale(1.0 / items.len() as f64);
                    for &v in items {
                        if self.requires(v) {
                            accumulate(&mut grads, v, share.clone());
                        }
                    }
                }
                Op::Bce {
                    logits,
                    targets,
                    pairs,
                    pos_weight,
                } => {
                    let x = self.value(*logits);
                    let scale = g.item() / pairs.len() as f64;
                    let mut gl = Mat::zeros(x.rows(), x.cols());
                    for &(i, j) in pairs {
                        let (xv, y) = (x[(i, j)], targets[(i, j)]);
                        let w = 1.0 + (pos_weight - 1.0) * y;
                        gl[(i, j)] = scale * ((1.0 - y) + w * (sigmoid(xv) - 1.0));
                    }
                    accumulate(&mut grads, *logits, gl);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// One BCE-with-logits term: `(1-y)x + w·(ln(1+e^{-|x|}) + max(-x, 0))`
/// with `w = 1 + (pos_weight-1)y`.
#[inline]
pub fn bce_term(x: f64, y: f64, pos_weight: f64) -> f64 {
    let w = 1.0 + (pos_weight - 1.0) * y;
    (1.0 - y) * x + w * ((-x.abs()).exp().ln_1p() + (-x).max(0.0))
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    /// Gradient of a leaf or parameter node, if the loss reached it.
    pub fn wrt(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds the gradients of every bound parameter into the store.
    pub fn accumulate_into(&self, tape: &Tape, store: &mut ParamStore) {
        for (node, g) in tape.nodes.iter().zip(&self.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.params[id.0].grad.add_assign(g);
            }
        }
    }
}
