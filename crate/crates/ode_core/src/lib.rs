//! Fixed-step ODE integrators and empirical convergence-order verification.
//!
//! The catalog covers forward Euler, improved Euler (Heun), Ralston RK2,
//! Kutta RK3, Heun's third-order method, classical RK4, and a three-state
//! Taylor multistep update
//!
//! ```text
//! θ_{l+1} = (3/2)θ_l − θ_{l−1} + (1/2)θ_{l−2} + τ·f(t_l, θ_l)
//! ```
//!
//! whose local truncation error is O(τ³) (global order 2). Multistep runs
//! seed their history window with a single-step bootstrap integrator, or
//! with the exact solution when measuring convergence order.

#![forbid(unsafe_code)]

mod error;
mod integrate;
mod methods;
mod order;
mod problem;
mod stability;

pub use error::{OdeError, Result};
pub use integrate::{integrate, integrate_with_bootstrap, Bootstrap, Trajectory};
pub use methods::{
    euler_step, heun3_step, improved_euler_step, rk2_ralston_step, rk3_kutta_step,
    rk4_classical_step, single_step, tm_step, IntegratorId, TmHistory, TM_STATE_WEIGHTS,
};
pub use order::{empirical_order, loglog_slope, OrderEstimate};
pub use problem::OdeProblem;
pub use stability::tm_stability_probe;
