//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every executed operation in order, together with the
//! inputs needed for its backward rule. [`Graph::backward`] walks the tape in
//! exact reverse execution order and accumulates gradients additively; grads
//! are never cleared implicitly.

use crate::error::{Error, Result};
use crate::tensor::dense::{check_same_shape, Scalar, Tensor};
use crate::tensor::kernels::{matmul_nn_acc, matmul_nt_acc, matmul_tn_acc};

/// Handle to a node in a [`Graph`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    /// C = A · B
    Matmul(Var, Var),
    /// C = A · Bᵀ
    MatmulNt(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    SoftmaxRows {
        x: Var,
        scale: f64,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
    },
    InfoNceRows {
        scores: Var,
        tau: f64,
    },
    MeanRows(Var),
    Sum(Var),
    ConcatCols(Vec<Var>),
    PoolGrid {
        x: Var,
        factor: usize,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
}

/// Ordered record of executed ops with values and gradient buffers.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Insert a non-trainable leaf (activations, data).
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Insert a trainable leaf. Identical mechanics to [`Graph::input`];
    /// the distinction is for call-site clarity.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, or zeros if `v` was not reached by backward.
    /// An unused parameter therefore reports an exactly-zero gradient.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor<T> {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.nodes[v.0].value.shape().to_vec()),
        }
    }

    pub fn zero_grads(&mut self) {
        for g in self.grads.iter_mut() {
            *g = None;
        }
    }

    // ---- forward ops ---------------------------------------------------

    /// `a[m×k] · b[k×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = (av.rows(), av.cols());
        let (k2, n) = (bv.rows(), bv.cols());
        if k != k2 {
            return Err(Error::DimMismatch {
                op: "matmul",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let mut out = Tensor::zeros(vec![m, n]);
        matmul_nn_acc(m, k, n, av.data(), bv.data(), out.data_mut());
        Ok(self.push(out, Op::Matmul(a, b)))
    }

    /// `a[m×k] · b[n×k]ᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = (av.rows(), av.cols());
        let (n, k2) = (bv.rows(), bv.cols());
        if k != k2 {
            return Err(Error::DimMismatch {
                op: "matmul_nt",
                lhs: av.shape().to_vec(),
                rhs: bv.shape().to_vec(),
            });
        }
        let mut out = Tensor::zeros(vec![m, n]);
        matmul_nt_acc(m, k, n, av.data(), bv.data(), out.data_mut());
        Ok(self.push(out, Op::MatmulNt(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same_shape("add", self.value(a), self.value(b))?;
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v * T::from_f64(c));
        self.push(out, Op::Scale(x, c))
    }

    /// Exact Gaussian-CDF GELU: `x · Φ(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu_scalar);
        self.push(out, Op::Gelu(x))
    }

    /// Row-wise softmax of `scale · x`, stabilized by row-max subtraction.
    pub fn softmax_rows(&mut self, x: Var, scale: f64) -> Result<Var> {
        let xv = self.value(x);
        if xv.cols() == 0 || xv.numel() == 0 {
            return Err(Error::Contract("softmax_rows on empty tensor".into()));
        }
        let (rows, cols) = (xv.rows(), xv.cols());
        let s = T::from_f64(scale);
        let mut out = Tensor::zeros(vec![rows, cols]);
        for i in 0..rows {
            softmax_row(xv.row(i), s, &mut out.data_mut()[i * cols..(i + 1) * cols]);
        }
        Ok(self.push(out, Op::SoftmaxRows { x, scale }))
    }

    /// Per-row normalization to zero mean / unit variance followed by the
    /// affine `gamma ⊙ x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let d = xv.cols();
        if gv.numel() != d || bv.numel() != d {
            return Err(Error::DimMismatch {
                op: "layer_norm",
                lhs: xv.shape().to_vec(),
                rhs: gv.shape().to_vec(),
            });
        }
        let rows = xv.rows();
        let mut out = Tensor::zeros(vec![rows, d]);
        for i in 0..rows {
            let row = xv.row(i);
            let (mu, inv_std) = row_moments(row, eps);
            let o = &mut out.data_mut()[i * d..(i + 1) * d];
            for j in 0..d {
                o[j] = gv.data()[j] * (row[j] - mu) * inv_std + bv.data()[j];
            }
        }
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            },
        ))
    }

    /// Mean over the batch of `−log softmax(logits)[label]`, log-sum-exp
    /// stabilized. Returns a 1x1 tensor.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        let (b, c) = (lv.rows(), lv.cols());
        if labels.len() != b {
            return Err(Error::Contract(format!(
                "cross_entropy: {} labels for {} rows",
                labels.len(),
                b
            )));
        }
        for &y in labels {
            if y >= c {
                return Err(Error::LabelRange {
                    label: y,
                    classes: c,
                });
            }
        }
        let mut total = 0.0f64;
        for (i, &y) in labels.iter().enumerate() {
            let row = lv.row(i);
            total += log_sum_exp(row) - row[y].as_f64();
        }
        let loss = Tensor::scalar(T::from_f64(total / b as f64));
        Ok(self.push(
            loss,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Token-index InfoNCE over a square score matrix `s`: the diagonal
    /// entries are positives, rows are normalized at temperature `tau`.
    /// Nonnegative, minimized toward zero as diagonals dominate.
    pub fn info_nce_rows(&mut self, scores: Var, tau: f64) -> Result<Var> {
        if tau <= 0.0 {
            return Err(Error::Config(format!("temperature must be > 0, got {tau}")));
        }
        let sv = self.value(scores);
        let n = sv.rows();
        if n == 0 || sv.cols() != n {
            return Err(Error::Contract(format!(
                "info_nce_rows needs a square nonempty matrix, got {:?}",
                sv.shape()
            )));
        }
        let mut total = 0.0f64;
        for i in 0..n {
            let row: Vec<f64> = sv.row(i).iter().map(|v| v.as_f64() / tau).collect();
            let lse = log_sum_exp_f64(&row);
            total += lse - row[i];
        }
        let loss = Tensor::scalar(T::from_f64(total / n as f64));
        Ok(self.push(loss, Op::InfoNceRows { scores, tau }))
    }

    /// Column means: `[N×d] → [1×d]`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        if n == 0 {
            return Err(Error::Contract("mean_rows on empty tensor".into()));
        }
        let inv = T::from_f64(1.0 / n as f64);
        let mut out = Tensor::zeros(vec![1, d]);
        for i in 0..n {
            for (o, &v) in out.data_mut().iter_mut().zip(xv.row(i)) {
                *o += v;
            }
        }
        out.scale_assign(inv);
        Ok(self.push(out, Op::MeanRows(x)))
    }

    /// Sum of all elements, as a 1x1 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let total: T = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum(x))
    }

    /// Concatenate matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        if xs.is_empty() {
            return Err(Error::Contract("concat_cols of zero tensors".into()));
        }
        let n = self.value(xs[0]).rows();
        let mut total_cols = 0;
        for &v in xs {
            let t = self.value(v);
            if t.rows() != n {
                return Err(Error::DimMismatch {
                    op: "concat_cols",
                    lhs: self.value(xs[0]).shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            total_cols += t.cols();
        }
        let mut out = Tensor::zeros(vec![n, total_cols]);
        let mut offset = 0;
        for &v in xs {
            let t = self.value(v);
            let c = t.cols();
            for i in 0..n {
                let dst = &mut out.data_mut()[i * total_cols + offset..i * total_cols + offset + c];
                dst.copy_from_slice(t.row(i));
            }
            offset += c;
        }
        let op = Op::ConcatCols(xs.to_vec());
        Ok(self.push(out, op))
    }

    /// Average-pool a row-major square token grid: `[g²×d] → [(g/f)²×d]`
    /// with window = stride = `factor`.
    pub fn pool_grid(&mut self, x: Var, factor: usize) -> Result<Var> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        let g = int_sqrt(n).ok_or_else(|| {
            Error::Contract(format!("pool_grid: token count {n} is not a square"))
        })?;
        if factor == 0 || g % factor != 0 {
            return Err(Error::Contract(format!(
                "pool_grid: factor {factor} does not divide grid side {g}"
            )));
        }
        let h = g / factor;
        let inv = T::from_f64(1.0 / (factor * factor) as f64);
        let mut out = Tensor::zeros(vec![h * h, d]);
        for r in 0..g {
            for c in 0..g {
                let dst_tok = (r / factor) * h + (c / factor);
                let src = xv.row(r * g + c);
                let dst = &mut out.data_mut()[dst_tok * d..(dst_tok + 1) * d];
                for (o, &v) in dst.iter_mut().zip(src) {
                    *o += v;
                }
            }
        }
        out.scale_assign(inv);
        Ok(self.push(out, Op::PoolGrid { x, factor }))
    }

    // ---- backward ------------------------------------------------------

    /// Reverse pass from a scalar loss, visiting ops in exact reverse
    /// execution order. Each call seeds `d(loss) = 1` on a fresh tape and
    /// then adds the results into the persistent gradient buffers, so
    /// accumulation across calls is additive; call [`Graph::zero_grads`]
    /// between optimizer steps.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut tape: Vec<Option<Tensor<T>>> = vec![None; loss.0 + 1];
        tape[loss.0] = Some(Tensor::scalar(T::one()));
        for id in (0..=loss.0).rev() {
            let Some(g) = tape[id].take() else {
                continue;
            };
            self.propagate(id, &g, &mut tape);
            tape[id] = Some(g);
        }
        for (id, g) in tape.into_iter().enumerate() {
            if let Some(g) = g {
                accum_into(&mut self.grads[id], g);
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Tensor<T>, tape: &mut [Option<Tensor<T>>]) {
        // Ops are recorded append-only, so inputs always precede `id`.
        let accum = |tape: &mut [Option<Tensor<T>>], v: Var, contribution: Tensor<T>| {
            accum_into(&mut tape[v.0], contribution);
        };
        let tape_grad = |tape: &mut [Option<Tensor<T>>], v: Var| -> Tensor<T> {
            match tape[v.0].take() {
                Some(g) => g,
                None => Tensor::zeros(self.nodes[v.0].value.shape().to_vec()),
            }
        };
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = self.value(b).cols();
                let mut da = tape_grad(tape, a);
                matmul_nt_acc(m, n, k, g.data(), self.value(b).data(), da.data_mut());
                tape[a.0] = Some(da);
                let mut db = tape_grad(tape, b);
                matmul_tn_acc(m, k, n, self.value(a).data(), g.data(), db.data_mut());
                tape[b.0] = Some(db);
            }
            Op::MatmulNt(a, b) => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.value(a).rows(), self.value(a).cols());
                let n = self.value(b).rows();
                let mut da = tape_grad(tape, a);
                matmul_nn_acc(m, n, k, g.data(), self.value(b).data(), da.data_mut());
                tape[a.0] = Some(da);
                let mut db = tape_grad(tape, b);
                matmul_tn_acc(m, n, k, g.data(), self.value(a).data(), db.data_mut());
                tape[b.0] = Some(db);
            }
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                accum(tape, a, g.clone());
                accum(tape, b, g.clone());
            }
            Op::Scale(x, c) => {
                let (x, c) = (*x, T::from_f64(*c));
                accum(tape, x, g.map(|v| v * c));
            }
            Op::Gelu(x) => {
                let x = *x;
                let mut dx = tape_grad(tape, x);
                for ((o, &xi), &gi) in dx
                    .data_mut()
                    .iter_mut()
                    .zip(self.nodes[x.0].value.data())
                    .zip(g.data())
                {
                    *o += gi * gelu_derivative(xi);
                }
                tape[x.0] = Some(dx);
            }
            Op::SoftmaxRows { x, scale } => {
                let (x, scale) = (*x, T::from_f64(*scale));
                let y = &self.nodes[id].value;
                let (rows, cols) = (y.rows(), y.cols());
                let mut dx = tape_grad(tape, x);
                for i in 0..rows {
                    let yr = y.row(i);
                    let gr = &g.data()[i * cols..(i + 1) * cols];
                    let dot: T = yr.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                    let dr = &mut dx.data_mut()[i * cols..(i + 1) * cols];
                    for j in 0..cols {
                        dr[j] += scale * yr[j] * (gr[j] - dot);
                    }
                }
                tape[x.0] = Some(dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                eps,
            } => {
                let (x, gamma, beta, eps) = (*x, *gamma, *beta, *eps);
                let mut dx = tape_grad(tape, x);
                let mut dgamma = tape_grad(tape, gamma);
                let mut dbeta = tape_grad(tape, beta);
                let xv = &self.nodes[x.0].value;
                let gv = &self.nodes[gamma.0].value;
                let (rows, d) = (xv.rows(), xv.cols());
                let inv_d = T::from_f64(1.0 / d as f64);
                for i in 0..rows {
                    let row = xv.row(i);
                    let (mu, inv_std) = row_moments(row, eps);
                    let gr = &g.data()[i * d..(i + 1) * d];
                    // dxhat = g ⊙ gamma; row reductions first, then the update
                    let mut mean_dxhat = T::zero();
                    let mut mean_dxhat_xhat = T::zero();
                    for j in 0..d {
                        let xhat = (row[j] - mu) * inv_std;
                        let dxhat = gr[j] * gv.data()[j];
                        mean_dxhat += dxhat;
                        mean_dxhat_xhat += dxhat * xhat;
                        dgamma.data_mut()[j] += gr[j] * xhat;
                        dbeta.data_mut()[j] += gr[j];
                    }
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    let dr = &mut dx.data_mut()[i * d..(i + 1) * d];
                    for j in 0..d {
                        let xhat = (row[j] - mu) * inv_std;
                        let dxhat = gr[j] * gv.data()[j];
                        dr[j] += inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                    }
                }
                tape[x.0] = Some(dx);
                tape[gamma.0] = Some(dgamma);
                tape[beta.0] = Some(dbeta);
            }
            Op::CrossEntropy { logits, labels } => {
                let logits = *logits;
                let mut dl = tape_grad(tape, logits);
                let lv = &self.nodes[logits.0].value;
                let (b, c) = (lv.rows(), lv.cols());
                let gs = g.item() * T::from_f64(1.0 / b as f64);
                for (i, &y) in labels.iter().enumerate() {
                    let row = lv.row(i);
                    let mut probs = vec![T::zero(); c];
                    softmax_row(row, T::one(), &mut probs);
                    let dr = &mut dl.data_mut()[i * c..(i + 1) * c];
                    for j in 0..c {
                        let indicator = if j == y { T::one() } else { T::zero() };
                        dr[j] += gs * (probs[j] - indicator);
                    }
                }
                tape[logits.0] = Some(dl);
            }
            Op::InfoNceRows { scores, tau } => {
                let (scores, tau) = (*scores, *tau);
                let mut ds = tape_grad(tape, scores);
                let sv = &self.nodes[scores.0].value;
                let n = sv.rows();
                let gs = g.item() * T::from_f64(1.0 / (n as f64 * tau));
                let inv_tau = T::from_f64(1.0 / tau);
                for i in 0..n {
                    let row = sv.row(i);
                    let mut probs = vec![T::zero(); n];
                    softmax_row(row, inv_tau, &mut probs);
                    let dr = &mut ds.data_mut()[i * n..(i + 1) * n];
                    for j in 0..n {
                        let indicator = if j == i { T::one() } else { T::zero() };
                        dr[j] += gs * (probs[j] - indicator);
                    }
                }
                tape[scores.0] = Some(ds);
            }
            Op::MeanRows(x) => {
                let x = *x;
                let (n, d) = (self.value(x).rows(), self.value(x).cols());
                let inv = T::from_f64(1.0 / n as f64);
                let mut dx = tape_grad(tape, x);
                for i in 0..n {
                    let dr = &mut dx.data_mut()[i * d..(i + 1) * d];
                    for (o, &gv) in dr.iter_mut().zip(g.data()) {
                        *o += gv * inv;
                    }
                }
                tape[x.0] = Some(dx);
            }
            Op::Sum(x) => {
                let x = *x;
                let gs = g.item();
                let mut dx = tape_grad(tape, x);
                for o in dx.data_mut() {
                    *o += gs;
                }
                tape[x.0] = Some(dx);
            }
            Op::ConcatCols(xs) => {
                let total_cols = self.nodes[id].value.cols();
                let n = self.nodes[id].value.rows();
                let mut offset = 0;
                for &v in xs {
                    let c = self.value(v).cols();
                    let mut dv = tape_grad(tape, v);
                    for i in 0..n {
                        let src = &g.data()[i * total_cols + offset..i * total_cols + offset + c];
                        let dst = &mut dv.data_mut()[i * c..(i + 1) * c];
                        for (o, &gv) in dst.iter_mut().zip(src) {
                            *o += gv;
                        }
                    }
                    tape[v.0] = Some(dv);
                    offset += c;
                }
            }
            Op::PoolGrid { x, factor } => {
                let (x, f) = (*x, *factor);
                let (n, d) = (self.value(x).rows(), self.value(x).cols());
                let g_side = int_sqrt(n).expect("validated at forward");
                let h = g_side / f;
                let inv = T::from_f64(1.0 / (f * f) as f64);
                let mut dx = tape_grad(tape, x);
                for r in 0..g_side {
                    for c in 0..g_side {
                        let src_tok = (r / f) * h + (c / f);
                        let src = &g.data()[src_tok * d..(src_tok + 1) * d];
                        let dst =
                            &mut dx.data_mut()[(r * g_side + c) * d..(r * g_side + c + 1) * d];
                        for (o, &gv) in dst.iter_mut().zip(src) {
                            *o += gv * inv;
                        }
                    }
                }
                tape[x.0] = Some(dx);
            }
        }
    }
}

fn accum_into<T: Scalar>(slot: &mut Option<Tensor<T>>, contribution: Tensor<T>) {
    match slot {
        Some(g) => g.add_assign(&contribution),
        None => *slot = Some(contribution),
    }
}

// ---- scalar math helpers ----------------------------------------------

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
fn phi<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * (T::one() + (x * T::from_f64(FRAC_1_SQRT_2)).erf())
}

fn gelu_scalar<T: Scalar>(x: T) -> T {
    x * phi(x)
}

fn gelu_derivative<T: Scalar>(x: T) -> T {
    let pdf = T::from_f64(INV_SQRT_2PI) * (-(x * x) * T::from_f64(0.5)).exp();
    phi(x) + x * pdf
}

fn row_moments<T: Scalar>(row: &[T], eps: f64) -> (T, T) {
    let d = T::from_f64(row.len() as f64);
    let mu = row.iter().copied().sum::<T>() / d;
    let var = row.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / d;
    (mu, T::one() / (var + T::from_f64(eps)).sqrt())
}

/// Row softmax of `scale · x` with max subtraction, written into `out`.
fn softmax_row<T: Scalar>(row: &[T], scale: T, out: &mut [T]) {
    let mut max = row[0] * scale;
    for &v in &row[1..] {
        let sv = v * scale;
        if sv > max {
            max = sv;
        }
    }
    let mut total = T::zero();
    for (o, &v) in out.iter_mut().zip(row) {
        let e = (v * scale - max).exp();
        *o = e;
        total += e;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> f64 {
    let vals: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
    log_sum_exp_f64(&vals)
}

fn log_sum_exp_f64(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn int_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    if r * r == n {
        Some(r)
    } else {
        None
    }
}
