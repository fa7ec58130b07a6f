//! Tape-based reverse-mode automatic differentiation.
//!
//! A `Tape` records one forward computation; `backward` walks it in reverse
//! and accumulates exact gradients. Parameters live outside the tape as
//! plain tensors and enter each step through `leaf`. A tape is confined to
//! one logical thread.

use crate::rng::StreamRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Running statistics owned by a batch-norm layer, updated during training
/// forward passes (momentum 0.1) and consumed in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<S> {
    pub running_mean: Tensor<S>,
    pub running_var: Tensor<S>,
    pub momentum: S,
}

impl<S: Scalar> BatchNormState<S> {
    pub fn new(dim: usize) -> BatchNormState<S> {
        BatchNormState {
            running_mean: Tensor::zeros(&[dim]),
            running_var: Tensor::ones(&[dim]),
            momentum: S::fromf(0.1),
        }
    }
}

enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// [n, d] + [d], broadcast over rows.
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    Narrow {
        x: Var,
        axis: usize,
        start: usize,
    },
    Transpose(Var),
    Reshape(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Relu(Var),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor<S>,
        inv_std: Vec<S>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor<S>,
        inv_std: Vec<S>,
        training: bool,
    },
    Dropout {
        x: Var,
        mask: Tensor<S>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Tensor<S>,
        active: usize,
    },
    Mse {
        pred: Var,
        target: Tensor<S>,
    },
    BceLogits {
        logits: Var,
        target: Tensor<S>,
    },
    L1 {
        x: Var,
        coeff: S,
    },
    SumAxis0(Var),
    SumAll(Var),
    /// [n] x [m] -> [n, m], out[i][j] = col[i] + row[j].
    OuterAdd {
        col: Var,
        row: Var,
    },
    /// Scatter learned per-class scalars onto (i, j) cells of an [n, m] grid.
    ClassScatter {
        values: Var,
        cells: Vec<(usize, usize, usize)>,
    },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

pub struct Tape<S: Scalar> {
    nodes: Vec<Node<S>>,
    training: bool,
}

/// Token id excluded from cross-entropy (pad positions).
pub const IGNORE_TARGET: usize = usize::MAX;

impl<S: Scalar> Tape<S> {
    pub fn new(training: bool) -> Tape<S> {
        Tape {
            nodes: Vec::new(),
            training,
        }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.leaf(value, false)
    }

    // -- arithmetic ---------------------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let (ta, tb) = (self.value(a), self.value(b));
            assert_eq!(ta.cols(), tb.rows(), "matmul shape");
            ta.matmul(tb)
        };
        let rg = self.requires(a) || self.requires(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip(self.value(b), |x, y| x + y);
        let rg = self.requires(a) || self.requires(b);
        self.push(out, Op::Add(a, b), rg)
    }

    /// Adds a length-d vector to every row of an [n, d] tensor.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let out = {
            let (tx, tb) = (self.value(x), self.value(bias));
            assert_eq!(tx.cols(), tb.numel(), "add_row width");
            let mut out = tx.clone();
            let cols = tx.cols();
            for r in 0..tx.rows() {
                for c in 0..cols {
                    let v = out.at2(r, c) + tb.data()[c];
                    out.set2(r, c, v);
                }
            }
            out
        };
        let rg = self.requires(x) || self.requires(bias);
        self.push(out, Op::AddRow(x, bias), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip(self.value(b), |x, y| x * y);
        let rg = self.requires(a) || self.requires(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, x: Var, factor: S) -> Var {
        let out = self.value(x).map(|v| v * factor);
        let rg = self.requires(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Var {
        assert!(!parts.is_empty());
        assert!(axis < 2, "concat supports 2-D tensors");
        let out = {
            let tensors: Vec<&Tensor<S>> = parts.iter().map(|&p| self.value(p)).collect();
            match axis {
                0 => {
                    let cols = tensors[0].cols();
                    assert!(tensors.iter().all(|t| t.cols() == cols));
                    let rows = tensors.iter().map(|t| t.rows()).sum();
                    let mut data = Vec::with_capacity(rows * cols);
                    for t in &tensors {
                        data.extend_from_slice(t.data());
                    }
                    Tensor::new(vec![rows, cols], data)
                }
                _ => {
                    let rows = tensors[0].rows();
                    assert!(tensors.iter().all(|t| t.rows() == rows));
                    let cols: usize = tensors.iter().map(|t| t.cols()).sum();
                    let mut data = Vec::with_capacity(rows * cols);
                    for r in 0..rows {
                        for t in &tensors {
                            data.extend_from_slice(t.row(r));
                        }
                    }
                    Tensor::new(vec![rows, cols], data)
                }
            }
        };
        let rg = parts.iter().any(|&p| self.requires(p));
        self.push(
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        )
    }

    /// Slice `len` indices starting at `start` along `axis` (2-D).
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Var {
        assert!(axis < 2);
        let out = {
            let t = self.value(x);
            match axis {
                0 => {
                    assert!(start + len <= t.rows());
                    let cols = t.cols();
                    let data = t.data()[start * cols..(start + len) * cols].to_vec();
                    Tensor::new(vec![len, cols], data)
                }
                _ => {
                    assert!(start + len <= t.cols());
                    let mut data = Vec::with_capacity(t.rows() * len);
                    for r in 0..t.rows() {
                        data.extend_from_slice(&t.row(r)[start..start + len]);
                    }
                    Tensor::new(vec![t.rows(), len], data)
                }
            }
        };
        let rg = self.requires(x);
        self.push(out, Op::Narrow { x, axis, start }, rg)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).transposed();
        let rg = self.requires(x);
        self.push(out, Op::Transpose(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let out = self.value(x).reshaped(shape);
        let rg = self.requires(x);
        self.push(out, Op::Reshape(x), rg)
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: &[usize]) -> Var {
        let out = {
            let t = self.value(table);
            let d = t.cols();
            let mut data = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                assert!(id < t.rows(), "embedding id {id} out of range");
                data.extend_from_slice(t.row(id));
            }
            Tensor::new(vec![ids.len(), d], data)
        };
        let rg = self.requires(table);
        self.push(
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        )
    }

    // -- activations --------------------------------------------------------

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > S::zero() { v } else { S::zero() });
        let rg = self.requires(x);
        self.push(out, Op::Relu(x), rg)
    }

    /// GeLU, tanh form: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
    pub fn gelu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(gelu_forward);
        let rg = self.requires(x);
        self.push(out, Op::Gelu(x), rg)
    }

    /// Row-wise softmax over the last dimension of a 2-D tensor.
    pub fn softmax(&mut self, x: Var) -> Var {
        let out = softmax_forward(self.value(x));
        let rg = self.requires(x);
        self.push(out, Op::Softmax(x), rg)
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let (out, xhat, inv_std) = {
            let t = self.value(x);
            let g = self.value(gamma);
            let b = self.value(beta);
            let (n, d) = (t.rows(), t.cols());
            assert_eq!(g.numel(), d, "layer_norm gamma width");
            assert_eq!(b.numel(), d, "layer_norm beta width");
            let mut xhat = Tensor::zeros(t.shape());
            let mut inv_std = Vec::with_capacity(n);
            let mut out = Tensor::zeros(t.shape());
            for r in 0..n {
                let row = t.row(r);
                let mean = row.iter().map(|v| v.tof()).sum::<f64>() / d as f64;
                let var = row
                    .iter()
                    .map(|v| {
                        let c = v.tof() - mean;
                        c * c
                    })
                    .sum::<f64>()
                    / d as f64;
                let istd = 1.0 / (var + eps).sqrt();
                inv_std.push(S::fromf(istd));
                for c in 0..d {
                    let xh = S::fromf((row[c].tof() - mean) * istd);
                    xhat.set2(r, c, xh);
                    out.set2(r, c, g.data()[c] * xh + b.data()[c]);
                }
            }
            (out, xhat, inv_std)
        };
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        )
    }

    /// Batch normalization over rows of [n, d]. Training mode uses batch
    /// statistics and updates `state`; inference mode reads running stats.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<S>,
        eps: f64,
    ) -> Var {
        let training = self.training;
        let (out, xhat, inv_std) = {
            let t = self.value(x);
            let g = self.value(gamma);
            let b = self.value(beta);
            let (n, d) = (t.rows(), t.cols());
            assert_eq!(g.numel(), d);
            assert_eq!(b.numel(), d);
            if training {
                assert!(n >= 2, "batch_norm training requires batch >= 2");
            }
            let mut xhat = Tensor::zeros(t.shape());
            let mut inv_std = Vec::with_capacity(d);
            let mut out = Tensor::zeros(t.shape());
            for c in 0..d {
                let (mean, var) = if training {
                    let mean = (0..n).map(|r| t.at2(r, c).tof()).sum::<f64>() / n as f64;
                    let var = (0..n)
                        .map(|r| {
                            let del = t.at2(r, c).tof() - mean;
                            del * del
                        })
                        .sum::<f64>()
                        / n as f64;
                    // running statistics: new = (1 - momentum) old + momentum batch
                    let m = state.momentum.tof();
                    let old_mean = state.running_mean.data()[c].tof();
                    let old_var = state.running_var.data()[c].tof();
                    state.running_mean.data_mut()[c] = S::fromf((1.0 - m) * old_mean + m * mean);
                    state.running_var.data_mut()[c] = S::fromf((1.0 - m) * old_var + m * var);
                    (mean, var)
                } else {
                    (
                        state.running_mean.data()[c].tof(),
                        state.running_var.data()[c].tof(),
                    )
                };
                let istd = 1.0 / (var + eps).sqrt();
                inv_std.push(S::fromf(istd));
                for r in 0..n {
                    let xh = S::fromf((t.at2(r, c).tof() - mean) * istd);
                    xhat.set2(r, c, xh);
                    out.set2(r, c, g.data()[c] * xh + b.data()[c]);
                }
            }
            (out, xhat, inv_std)
        };
        let rg = self.requires(x) || self.requires(gamma) || self.requires(beta);
        self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                training,
            },
            rg,
        )
    }

    /// Dropout at rate `p`: in training mode zeroes activations with
    /// probability `p` and scales survivors by 1/(1-p); identity otherwise.
    pub fn dropout(&mut self, x: Var, p: f64, rng: &mut StreamRng) -> Var {
        if !self.training || p == 0.0 {
            return x;
        }
        assert!((0.0..1.0).contains(&p));
        let keep_scale = S::fromf(1.0 / (1.0 - p));
        let mask = {
            let t = self.value(x);
            let data = (0..t.numel())
                .map(|_| {
                    if rng.bernoulli(p) {
                        S::zero()
                    } else {
                        keep_scale
                    }
                })
                .collect();
            Tensor::new(t.shape().to_vec(), data)
        };
        let out = self.value(x).zip(&mask, |v, m| v * m);
        let rg = self.requires(x);
        self.push(out, Op::Dropout { x, mask }, rg)
    }

    // -- losses -------------------------------------------------------------

    /// Mean cross-entropy of row-wise logits against integer targets.
    /// Targets equal to [`IGNORE_TARGET`] are excluded from the mean.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let (loss, probs, active) = {
            let t = self.value(logits);
            assert_eq!(t.rows(), targets.len(), "cross_entropy target count");
            let probs = softmax_forward(t);
            let mut total = 0.0f64;
            let mut active = 0usize;
            for (r, &target) in targets.iter().enumerate() {
                if target == IGNORE_TARGET {
                    continue;
                }
                active += 1;
                let row = t.row(r);
                let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.tof()));
                let logsumexp =
                    max + row.iter().map(|v| (v.tof() - max).exp()).sum::<f64>().ln();
                total += logsumexp - row[target].tof();
            }
            let denom = active.max(1) as f64;
            (S::fromf(total / denom), probs, active)
        };
        let rg = self.requires(logits);
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
                active,
            },
            rg,
        )
    }

    /// Mean squared error against a fixed target tensor.
    pub fn mse(&mut self, pred: Var, target: &Tensor<S>) -> Var {
        let out = {
            let p = self.value(pred);
            assert_eq!(p.numel(), target.numel(), "mse target length");
            let total: f64 = p
                .data()
                .iter()
                .zip(target.data())
                .map(|(a, b)| {
                    let d = a.tof() - b.tof();
                    d * d
                })
                .sum();
            S::fromf(total / p.numel() as f64)
        };
        let rg = self.requires(pred);
        self.push(
            Tensor::scalar(out),
            Op::Mse {
                pred,
                target: target.clone(),
            },
            rg,
        )
    }

    /// Mean binary cross-entropy on logits (sigmoid applied internally).
    pub fn bce_logits(&mut self, logits: Var, target: &Tensor<S>) -> Var {
        let out = {
            let p = self.value(logits);
            assert_eq!(p.numel(), target.numel(), "bce target length");
            let total: f64 = p
                .data()
                .iter()
                .zip(target.data())
                .map(|(x, t)| {
                    let (x, t) = (x.tof(), t.tof());
                    x.max(0.0) - x * t + (1.0 + (-x.abs()).exp()).ln()
                })
                .sum();
            S::fromf(total / p.numel() as f64)
        };
        let rg = self.requires(logits);
        self.push(
            Tensor::scalar(out),
            Op::BceLogits {
                logits,
                target: target.clone(),
            },
            rg,
        )
    }

    /// `coeff * sum(|x|)`, the L1 sparsity penalty.
    pub fn l1_penalty(&mut self, x: Var, coeff: f64) -> Var {
        let coeff = S::fromf(coeff);
        let out = {
            let t = self.value(x);
            let total: f64 = t.data().iter().map(|v| v.tof().abs()).sum();
            S::fromf(total) * coeff
        };
        let rg = self.requires(x);
        self.push(Tensor::scalar(out), Op::L1 { x, coeff }, rg)
    }

    /// Sum of all elements, as a scalar.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let total = {
            let t = self.value(x);
            S::fromf(t.data().iter().map(|v| v.tof()).sum())
        };
        let rg = self.requires(x);
        self.push(Tensor::scalar(total), Op::SumAll(x), rg)
    }

    /// Column-wise sum over rows: [n, d] -> [d]. Used for add pooling.
    pub fn sum_axis0(&mut self, x: Var) -> Var {
        let out = {
            let t = self.value(x);
            let (n, d) = (t.rows(), t.cols());
            let mut data = vec![S::zero(); d];
            for r in 0..n {
                for c in 0..d {
                    data[c] += t.at2(r, c);
                }
            }
            Tensor::new(vec![d], data)
        };
        let rg = self.requires(x);
        self.push(out, Op::SumAxis0(x), rg)
    }

    /// out[i][j] = col[i] + row[j].
    pub fn outer_add(&mut self, col: Var, row: Var) -> Var {
        let out = {
            let (c, r) = (self.value(col), self.value(row));
            let (n, m) = (c.numel(), r.numel());
            let mut data = Vec::with_capacity(n * m);
            for i in 0..n {
                for j in 0..m {
                    data.push(c.data()[i] + r.data()[j]);
                }
            }
            Tensor::new(vec![n, m], data)
        };
        let rg = self.requires(col) || self.requires(row);
        self.push(out, Op::OuterAdd { col, row }, rg)
    }

    /// Builds an [n, m] grid that holds `values[class]` at each listed
    /// (i, j, class) cell and zero elsewhere.
    pub fn class_scatter(
        &mut self,
        values: Var,
        cells: &[(usize, usize, usize)],
        shape: (usize, usize),
    ) -> Var {
        let out = {
            let v = self.value(values);
            let mut out = Tensor::zeros(&[shape.0, shape.1]);
            for &(i, j, class) in cells {
                out.set2(i, j, v.data()[class]);
            }
            out
        };
        let rg = self.requires(values);
        self.push(
            out,
            Op::ClassScatter {
                values,
                cells: cells.to_vec(),
            },
            rg,
        )
    }

    // -- backward -----------------------------------------------------------

    /// Runs reverse-mode accumulation from `root` (a scalar). Returns the
    /// gradient per node; fetch them with [`Tape::grad`].
    pub fn backward(&mut self, root: Var) -> Gradients<S> {
        assert_eq!(self.nodes[root.0].value.numel(), 1, "backward from scalar");
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::scalar(S::one()));

        for idx in (0..=root.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(grad) = grads[idx].take() else {
                continue;
            };
            self.accumulate(idx, &grad, &mut grads);
            grads[idx] = Some(grad);
        }
        Gradients { grads }
    }

    fn add_grad(&self, grads: &mut [Option<Tensor<S>>], var: Var, delta: Tensor<S>) {
        if !self.nodes[var.0].requires_grad {
            return;
        }
        match &mut grads[var.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        }
    }

    #[allow(clippy::too_many_lines)]
    fn accumulate(&self, idx: usize, grad: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.add_grad(grads, *a, grad.matmul_t(tb));
                self.add_grad(grads, *b, ta.t_matmul(grad));
            }
            Op::Add(a, b) => {
                self.add_grad(grads, *a, grad.clone());
                self.add_grad(grads, *b, grad.clone());
            }
            Op::AddRow(x, bias) => {
                self.add_grad(grads, *x, grad.clone());
                let d = self.value(*bias).numel();
                let mut bg = vec![S::zero(); d];
                for r in 0..grad.rows() {
                    for c in 0..d {
                        bg[c] += grad.at2(r, c);
                    }
                }
                self.add_grad(grads, *bias, Tensor::new(vec![d], bg));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.add_grad(grads, *a, grad.zip(tb, |g, y| g * y));
                self.add_grad(grads, *b, grad.zip(ta, |g, x| g * x));
            }
            Op::Scale(x, factor) => {
                self.add_grad(grads, *x, grad.map(|g| g * *factor));
            }
            Op::Concat { parts, axis } => match axis {
                0 => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = self.value(p).rows();
                        let cols = self.value(p).cols();
                        let slice =
                            grad.data()[offset * cols..(offset + rows) * cols].to_vec();
                        self.add_grad(
                            grads,
                            p,
                            Tensor::new(self.value(p).shape().to_vec(), slice),
                        );
                        offset += rows;
                    }
                }
                _ => {
                    let mut offset = 0;
                    for &p in parts {
                        let t = self.value(p);
                        let (rows, cols) = (t.rows(), t.cols());
                        let mut data = Vec::with_capacity(rows * cols);
                        for r in 0..rows {
                            data.extend_from_slice(&grad.row(r)[offset..offset + cols]);
                        }
                        self.add_grad(grads, p, Tensor::new(t.shape().to_vec(), data));
                        offset += cols;
                    }
                }
            },
            Op::Narrow { x, axis, start } => {
                let t = self.value(*x);
                let mut dx = Tensor::zeros(t.shape());
                match axis {
                    0 => {
                        let cols = t.cols();
                        let flat = dx.data_mut();
                        flat[start * cols..start * cols + grad.numel()]
                            .copy_from_slice(grad.data());
                    }
                    _ => {
                        let len = grad.cols();
                        for r in 0..t.rows() {
                            for c in 0..len {
                                dx.set2(r, start + c, grad.at2(r, c));
                            }
                        }
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::Transpose(x) => {
                self.add_grad(grads, *x, grad.transposed());
            }
            Op::Reshape(x) => {
                let shape = self.value(*x).shape().to_vec();
                self.add_grad(grads, *x, grad.reshaped(shape));
            }
            Op::Embedding { table, ids } => {
                let t = self.value(*table);
                let d = t.cols();
                let mut dt = Tensor::zeros(t.shape());
                for (r, &id) in ids.iter().enumerate() {
                    for c in 0..d {
                        let v = dt.at2(id, c) + grad.at2(r, c);
                        dt.set2(id, c, v);
                    }
                }
                self.add_grad(grads, *table, dt);
            }
            Op::Relu(x) => {
                let t = self.value(*x);
                self.add_grad(
                    grads,
                    *x,
                    grad.zip(t, |g, v| if v > S::zero() { g } else { S::zero() }),
                );
            }
            Op::Gelu(x) => {
                let t = self.value(*x);
                self.add_grad(grads, *x, grad.zip(t, |g, v| g * gelu_grad(v)));
            }
            Op::Softmax(x) => {
                let y = &self.nodes[idx].value;
                let (n, d) = (y.rows(), y.cols());
                let mut dx = Tensor::zeros(y.shape());
                for r in 0..n {
                    let dot: f64 = (0..d)
                        .map(|c| grad.at2(r, c).tof() * y.at2(r, c).tof())
                        .sum();
                    for c in 0..d {
                        let v = y.at2(r, c).tof() * (grad.at2(r, c).tof() - dot);
                        dx.set2(r, c, S::fromf(v));
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let g = self.value(*gamma);
                let (n, d) = (xhat.rows(), xhat.cols());
                let mut dgamma = vec![S::zero(); d];
                let mut dbeta = vec![S::zero(); d];
                let mut dx = Tensor::zeros(xhat.shape());
                for r in 0..n {
                    let mut sum_gy = 0.0f64;
                    let mut sum_gy_xhat = 0.0f64;
                    for c in 0..d {
                        let gy = grad.at2(r, c).tof() * g.data()[c].tof();
                        sum_gy += gy;
                        sum_gy_xhat += gy * xhat.at2(r, c).tof();
                        dgamma[c] += grad.at2(r, c) * xhat.at2(r, c);
                        dbeta[c] += grad.at2(r, c);
                    }
                    let mean_gy = sum_gy / d as f64;
                    let mean_gy_xhat = sum_gy_xhat / d as f64;
                    for c in 0..d {
                        let gy = grad.at2(r, c).tof() * g.data()[c].tof();
                        let v = (gy - mean_gy - xhat.at2(r, c).tof() * mean_gy_xhat)
                            * inv_std[r].tof();
                        dx.set2(r, c, S::fromf(v));
                    }
                }
                self.add_grad(grads, *x, dx);
                self.add_grad(grads, *gamma, Tensor::new(vec![d], dgamma));
                self.add_grad(grads, *beta, Tensor::new(vec![d], dbeta));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                training,
            } => {
                let g = self.value(*gamma);
                let (n, d) = (xhat.rows(), xhat.cols());
                let mut dgamma = vec![S::zero(); d];
                let mut dbeta = vec![S::zero(); d];
                let mut dx = Tensor::zeros(xhat.shape());
                for c in 0..d {
                    let mut sum_gy = 0.0f64;
                    let mut sum_gy_xhat = 0.0f64;
                    for r in 0..n {
                        let gy = grad.at2(r, c).tof() * g.data()[c].tof();
                        sum_gy += gy;
                        sum_gy_xhat += gy * xhat.at2(r, c).tof();
                        dgamma[c] += grad.at2(r, c) * xhat.at2(r, c);
                        dbeta[c] += grad.at2(r, c);
                    }
                    for r in 0..n {
                        let gy = grad.at2(r, c).tof() * g.data()[c].tof();
                        let v = if *training {
                            (gy - sum_gy / n as f64
                                - xhat.at2(r, c).tof() * sum_gy_xhat / n as f64)
                                * inv_std[c].tof()
                        } else {
                            gy * inv_std[c].tof()
                        };
                        dx.set2(r, c, S::fromf(v));
                    }
                }
                self.add_grad(grads, *x, dx);
                self.add_grad(grads, *gamma, Tensor::new(vec![d], dgamma));
                self.add_grad(grads, *beta, Tensor::new(vec![d], dbeta));
            }
            Op::Dropout { x, mask } => {
                self.add_grad(grads, *x, grad.zip(mask, |g, m| g * m));
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
                active,
            } => {
                let scale = grad.item().tof() / (*active).max(1) as f64;
                let (n, v) = (probs.rows(), probs.cols());
                let mut dl = Tensor::zeros(probs.shape());
                for r in 0..n {
                    if targets[r] == IGNORE_TARGET {
                        continue;
                    }
                    for c in 0..v {
                        let p = probs.at2(r, c).tof();
                        let onehot = if c == targets[r] { 1.0 } else { 0.0 };
                        dl.set2(r, c, S::fromf((p - onehot) * scale));
                    }
                }
                self.add_grad(grads, *logits, dl);
            }
            Op::Mse { pred, target } => {
                let p = self.value(*pred);
                let n = p.numel() as f64;
                let scale = grad.item().tof() * 2.0 / n;
                let dp = Tensor::new(
                    p.shape().to_vec(),
                    p.data()
                        .iter()
                        .zip(target.data())
                        .map(|(a, b)| S::fromf((a.tof() - b.tof()) * scale))
                        .collect(),
                );
                self.add_grad(grads, *pred, dp);
            }
            Op::BceLogits { logits, target } => {
                let p = self.value(*logits);
                let n = p.numel() as f64;
                let scale = grad.item().tof() / n;
                let dl = Tensor::new(
                    p.shape().to_vec(),
                    p.data()
                        .iter()
                        .zip(target.data())
                        .map(|(x, t)| {
                            let sig = 1.0 / (1.0 + (-x.tof()).exp());
                            S::fromf((sig - t.tof()) * scale)
                        })
                        .collect(),
                );
                self.add_grad(grads, *logits, dl);
            }
            Op::L1 { x, coeff } => {
                let t = self.value(*x);
                let g = grad.item();
                let dx = t.map(|v| {
                    if v > S::zero() {
                        g * *coeff
                    } else if v < S::zero() {
                        -(g * *coeff)
                    } else {
                        S::zero()
                    }
                });
                self.add_grad(grads, *x, dx);
            }
            Op::SumAll(x) => {
                let t = self.value(*x);
                let g = grad.item();
                self.add_grad(grads, *x, Tensor::full(t.shape(), g));
            }
            Op::SumAxis0(x) => {
                let t = self.value(*x);
                let (n, d) = (t.rows(), t.cols());
                let mut dx = Tensor::zeros(t.shape());
                for r in 0..n {
                    for c in 0..d {
                        dx.set2(r, c, grad.data()[c]);
                    }
                }
                self.add_grad(grads, *x, dx);
            }
            Op::OuterAdd { col, row } => {
                let (n, m) = (self.value(*col).numel(), self.value(*row).numel());
                let mut dcol = vec![S::zero(); n];
                let mut drow = vec![S::zero(); m];
                for i in 0..n {
                    for j in 0..m {
                        dcol[i] += grad.at2(i, j);
                        drow[j] += grad.at2(i, j);
                    }
                }
                self.add_grad(grads, *col, Tensor::new(vec![n], dcol));
                self.add_grad(grads, *row, Tensor::new(vec![m], drow));
            }
            Op::ClassScatter { values, cells } => {
                let k = self.value(*values).numel();
                let mut dv = vec![S::zero(); k];
                for &(i, j, class) in cells {
                    dv[class] += grad.at2(i, j);
                }
                self.add_grad(grads, *values, Tensor::new(vec![k], dv));
            }
        }
    }
}

/// Result of a backward pass.
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient for `var`; zeros if the node never received one.
    pub fn get(&self, var: Var, tape: &Tape<S>) -> Tensor<S> {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(tape.value(var).shape()),
        }
    }

    pub fn take(&mut self, var: Var) -> Option<Tensor<S>> {
        self.grads[var.0].take()
    }
}

fn gelu_forward<S: Scalar>(x: S) -> S {
    let xf = x.tof();
    let u = (2.0 / std::f64::consts::PI).sqrt() * (xf + 0.044715 * xf * xf * xf);
    S::fromf(0.5 * xf * (1.0 + u.tanh()))
}

fn gelu_grad<S: Scalar>(x: S) -> S {
    let xf = x.tof();
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (xf + 0.044715 * xf * xf * xf);
    let t = u.tanh();
    let sech2 = 1.0 - t * t;
    S::fromf(0.5 * (1.0 + t) + 0.5 * xf * sech2 * c * (1.0 + 3.0 * 0.044715 * xf * xf))
}

fn softmax_forward<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (n, d) = (x.rows(), x.cols());
    let mut out = Tensor::zeros(x.shape());
    for r in 0..n {
        let row = x.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.tof()));
        let exps: Vec<f64> = row.iter().map(|v| (v.tof() - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for c in 0..d {
            out.set2(r, c, S::fromf(exps[c] / total));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_x_squared_is_2x() {
        let mut tape = Tape::<f64>::new(false);
        let x = tape.leaf(Tensor::scalar(3.0), true);
        let y = tape.mul(x, x);
        let grads = tape.backward(y);
        assert_eq!(grads.get(x, &tape).item(), 6.0);
    }

    #[test]
    fn softmax_symmetry_and_row_sums() {
        let mut tape = Tape::<f64>::new(false);
        let x = tape.leaf(Tensor::new(vec![1, 2], vec![0.0, 0.0]), false);
        let y = tape.softmax(x);
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
        let x2 = tape.leaf(Tensor::new(vec![2, 3], vec![1.0, -2.0, 0.3, 9.0, 9.0, 9.0]), false);
        let y2 = tape.softmax(x2);
        for r in 0..2 {
            let s: f64 = tape.value(y2).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn relu_and_gelu_at_zero() {
        let mut tape = Tape::<f64>::new(false);
        let x = tape.leaf(Tensor::new(vec![2], vec![0.0, -1.0]), false);
        let g = tape.gelu(x);
        let r = tape.relu(x);
        assert_eq!(tape.value(g).data()[0], 0.0);
        assert_eq!(tape.value(r).data()[1], 0.0);
    }

    #[test]
    fn uniform_logits_loss_is_ln_v() {
        let mut tape = Tape::<f64>::new(false);
        let v = 7usize;
        let logits = tape.leaf(Tensor::zeros(&[3, v]), false);
        let loss = tape.cross_entropy(logits, &[0, 3, 6]);
        assert!((tape.value(loss).item() - (v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_logits_loss_near_zero() {
        let mut tape = Tape::<f64>::new(false);
        let mut t = Tensor::zeros(&[2, 4]);
        t.set2(0, 1, 100.0);
        t.set2(1, 2, 100.0);
        let logits = tape.leaf(t, false);
        let loss = tape.cross_entropy(logits, &[1, 2]);
        assert!(tape.value(loss).item() < 1e-9);
    }

    #[test]
    fn pad_targets_excluded() {
        let mut tape = Tape::<f64>::new(false);
        let mut t = Tensor::zeros(&[2, 3]);
        // second row has arbitrary junk; ignored target must not see it
        t.set2(1, 0, 123.0);
        let logits = tape.leaf(t, false);
        let loss = tape.cross_entropy(logits, &[1, IGNORE_TARGET]);
        assert!((tape.value(loss).item() - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn dropout_eval_is_identity_and_train_scales() {
        let mut rng = StreamRng::named(1, "dropout-test");
        let mut tape = Tape::<f64>::new(false);
        let x = tape.leaf(Tensor::ones(&[4, 4]), false);
        let y = tape.dropout(x, 0.5, &mut rng);
        assert_eq!(x, y); // same node, no-op

        let mut tape = Tape::<f64>::new(true);
        let x = tape.leaf(Tensor::ones(&[100, 100]), false);
        let y = tape.dropout(x, 0.25, &mut rng);
        let data = tape.value(y).data();
        assert!(data.iter().all(|&v| v == 0.0 || (v - 4.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn batch_norm_updates_running_stats() {
        let mut state = BatchNormState::<f64>::new(2);
        let mut tape = Tape::<f64>::new(true);
        let x = tape.leaf(
            Tensor::new(vec![4, 2], vec![1.0, 10.0, 3.0, 10.0, 5.0, 10.0, 7.0, 10.0]),
            false,
        );
        let gamma = tape.leaf(Tensor::ones(&[2]), false);
        let beta = tape.leaf(Tensor::zeros(&[2]), false);
        let _ = tape.batch_norm(x, gamma, beta, &mut state, 1e-5);
        // mean of col0 is 4.0; running mean = 0.9*0 + 0.1*4
        assert!((state.running_mean.data()[0] - 0.4).abs() < 1e-12);
        assert!((state.running_mean.data()[1] - 1.0).abs() < 1e-12);
    }
}
