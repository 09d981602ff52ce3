//! Minimal dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Supports exactly the layers a pre-activation residual CNN needs: 2D
//! cross-correlation (no bias), batch norm, ReLU, affine heads, global
//! average pooling, and softmax cross-entropy, plus elementwise linear
//! combinations for residual wiring. Forward operations append nodes to a
//! [`Tape`]; [`Tape::backward`] accumulates exact reverse-mode gradients
//! into a [`ParamStore`].
//!
//! Everything is generic over [`Dtype`]: f32 for training throughput, f64
//! for finite-difference gradient checks.

#![forbid(unsafe_code)]

mod error;
mod gradcheck;
pub mod kernels;
mod params;
mod tape;
mod tensor;

pub use error::{AdError, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{BnBatchStats, NodeId, Tape};
pub use tensor::{Dtype, Tensor};
