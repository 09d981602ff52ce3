//! Residual networks whose inter-block wiring realizes an ODE integrator.
//!
//! Euler stacking is the plain pre-activation residual network
//! `x_{i+1} = x_i + F(x_i)`. Runge-Kutta stackings evaluate one shared
//! residual function per stage row and combine the stages with the scheme's
//! fixed weights, so they hold exactly one block's worth of parameters.
//! Taylor-multistep stacking boots each stage with three Euler blocks and
//! then applies `x_{i+1} = 1.5·x_i − x_{i−1} + 0.5·x_{i−2} + τ·F(x_i)`.
//! Every scheme adds only scalar coefficients: models with equal stage
//! plans have identical parameter counts.

#![forbid(unsafe_code)]

mod config;
mod error;
mod gradcheck;
mod init;
mod model;
mod presets;

pub use config::{
    ModelConfig, SchemeCoefficients, SchemeKind, StageConfig, EULER, IE, RK2, RK3, RK4, TM,
};
pub use error::{Result, StackError};
pub use gradcheck::check_model_gradients;
pub use init::Initializer;
pub use model::{tm_combine, Mode, Model, RunningStats, BN_EPS, BN_MOMENTUM};
pub use presets::{preset, PRESET_NAMES};
