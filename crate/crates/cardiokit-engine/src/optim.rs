//! Optimizers, gradient clipping and the plateau scheduler.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimError {
    #[error("shape mismatch between parameter {index} and its gradient")]
    ShapeMismatch { index: usize },

    #[error("negative diagonal Hessian estimate at parameter {index}")]
    NegativeHessianEstimate { index: usize },
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct AdamWState<S> {
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl<S: Scalar> AdamWState<S> {
    pub fn new(shapes: &[&[usize]], lr: f64, weight_decay: f64) -> AdamWState<S> {
        AdamWState {
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    pub fn for_params(params: &[Tensor<S>], lr: f64, weight_decay: f64) -> AdamWState<S> {
        let shapes: Vec<&[usize]> = params.iter().map(Tensor::shape).collect();
        AdamWState::new(&shapes, lr, weight_decay)
    }
}

/// One AdamW step: decoupled weight decay, then the bias-corrected update.
pub fn adamw_step<S: Scalar>(
    state: &mut AdamWState<S>,
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
) -> Result<(), OptimError> {
    check_shapes(params, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (i, param) in params.iter_mut().enumerate() {
        let g = &grads[i];
        // decoupled decay
        if state.weight_decay != 0.0 {
            let factor = S::fromf(1.0 - state.lr * state.weight_decay);
            param.scale_assign(factor);
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for ((pm, pv), (p, gg)) in m
            .data_mut()
            .iter_mut()
            .zip(v.data_mut())
            .zip(param.data_mut().iter_mut().zip(g.data()))
        {
            let gf = gg.tof();
            let mf = state.beta1 * pm.tof() + (1.0 - state.beta1) * gf;
            let vf = state.beta2 * pv.tof() + (1.0 - state.beta2) * gf * gf;
            *pm = S::fromf(mf);
            *pv = S::fromf(vf);
            let mhat = mf / bc1;
            let vhat = vf / bc2;
            *p = S::fromf(p.tof() - state.lr * mhat / (vhat.sqrt() + state.eps));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sophia
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SophiaState<S> {
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    /// Diagonal Hessian EMA, elementwise nonnegative.
    pub h: Vec<Tensor<S>>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho_clip: f64,
    pub gamma: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub hessian_interval: u64,
}

impl<S: Scalar> SophiaState<S> {
    pub fn for_params(params: &[Tensor<S>], lr: f64, weight_decay: f64) -> SophiaState<S> {
        SophiaState {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            h: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            lr,
            beta1: 0.96,
            beta2: 0.99,
            rho_clip: 1.0,
            gamma: 0.05,
            eps: 1e-12,
            weight_decay,
            hessian_interval: 10,
        }
    }

    /// Whether the next call to [`sophia_step`] will invoke the Hessian hook.
    pub fn hessian_due(&self) -> bool {
        self.step % self.hessian_interval == 0
    }
}

/// One Sophia step. `hessian_hook` must yield a nonnegative diagonal
/// estimate (Gauss-Newton-Bartlett style: squared gradients taken against
/// labels sampled from the model's own output distribution); it is invoked
/// every `hessian_interval` steps.
pub fn sophia_step<S: Scalar, F>(
    state: &mut SophiaState<S>,
    params: &mut [Tensor<S>],
    grads: &[Tensor<S>],
    mut hessian_hook: F,
) -> Result<(), OptimError>
where
    F: FnMut() -> Vec<Tensor<S>>,
{
    check_shapes(params, grads)?;
    if state.hessian_due() {
        let estimate = hessian_hook();
        if estimate.len() != params.len() {
            return Err(OptimError::ShapeMismatch {
                index: estimate.len().min(params.len()),
            });
        }
        for (i, est) in estimate.iter().enumerate() {
            if est.shape() != params[i].shape() {
                return Err(OptimError::ShapeMismatch { index: i });
            }
            if est.data().iter().any(|v| *v < S::zero()) {
                return Err(OptimError::NegativeHessianEstimate { index: i });
            }
            for (h, e) in state.h[i].data_mut().iter_mut().zip(est.data()) {
                *h = S::fromf(state.beta2 * h.tof() + (1.0 - state.beta2) * e.tof());
            }
        }
    }
    state.step += 1;

    for (i, param) in params.iter_mut().enumerate() {
        if state.weight_decay != 0.0 {
            let factor = S::fromf(1.0 - state.lr * state.weight_decay);
            param.scale_assign(factor);
        }
        let m = &mut state.m[i];
        let h = &state.h[i];
        for ((pm, ph), (p, g)) in m
            .data_mut()
            .iter_mut()
            .zip(h.data())
            .zip(param.data_mut().iter_mut().zip(grads[i].data()))
        {
            let mf = state.beta1 * pm.tof() + (1.0 - state.beta1) * g.tof();
            *pm = S::fromf(mf);
            let denom = (state.gamma * ph.tof()).max(state.eps);
            let u = (mf / denom).clamp(-state.rho_clip, state.rho_clip);
            *p = S::fromf(p.tof() - state.lr * u);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gradient clipping
// ---------------------------------------------------------------------------

/// Scales all gradients by max_norm/g when the global L2 norm g exceeds
/// max_norm. Norm accumulation is in f64. Returns the pre-clip norm.
pub fn clip_grad_norm<S: Scalar>(grads: &mut [Tensor<S>], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(Tensor::sq_norm_f64)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = S::fromf(max_norm / norm);
        for g in grads.iter_mut() {
            g.scale_assign(factor);
        }
    }
    norm
}

// ---------------------------------------------------------------------------
// Plateau scheduler
// ---------------------------------------------------------------------------

/// Halves the learning rate after `patience` consecutive epochs without
/// improvement over the best seen loss.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub best_loss: f64,
    pub epochs_since_improvement: u32,
    pub patience: u32,
    pub factor: f64,
}

impl Default for PlateauScheduler {
    fn default() -> Self {
        PlateauScheduler {
            best_loss: f64::INFINITY,
            epochs_since_improvement: 0,
            patience: 10,
            factor: 0.5,
        }
    }
}

impl PlateauScheduler {
    pub fn new() -> PlateauScheduler {
        PlateauScheduler::default()
    }

    /// Feeds one epoch loss; returns the (possibly halved) learning rate.
    pub fn step(&mut self, epoch_loss: f64, lr: f64) -> f64 {
        assert!(epoch_loss.is_finite(), "plateau scheduler needs finite loss");
        if epoch_loss < self.best_loss {
            self.best_loss = epoch_loss;
            self.epochs_since_improvement = 0;
            return lr;
        }
        self.epochs_since_improvement += 1;
        if self.epochs_since_improvement >= self.patience {
            self.epochs_since_improvement = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

fn check_shapes<S: Scalar>(params: &[Tensor<S>], grads: &[Tensor<S>]) -> Result<(), OptimError> {
    if params.len() != grads.len() {
        return Err(OptimError::ShapeMismatch {
            index: params.len().min(grads.len()),
        });
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(OptimError::ShapeMismatch { index: i });
        }
    }
    Ok(())
}
