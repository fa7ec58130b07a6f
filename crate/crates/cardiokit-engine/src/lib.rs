//! Minimal dense-tensor engine with reverse-mode autodiff, generic over the
//! scalar type (f32 for training speed, f64 for numeric checks), plus the
//! optimizers and scheduler the training recipes need.

pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use optim::{
    adamw_step, clip_grad_norm, sophia_step, AdamWState, OptimError, PlateauScheduler,
    SophiaState,
};
pub use rng::StreamRng;
pub use scalar::Scalar;
pub use tape::{BatchNormState, Gradients, Tape, Var, IGNORE_TARGET};
pub use tensor::Tensor;

/// Concrete aliases for the two supported scalar types.
pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Tape32 = Tape<f32>;
pub type Tape64 = Tape<f64>;
