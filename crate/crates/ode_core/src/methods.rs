//! Single-step integrators and the three-state Taylor multistep update.

use crate::error::{OdeError, Result};
use crate::problem::OdeProblem;
use std::fmt;

/// Identifies one integration scheme and its theoretical global order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegratorId {
    Euler,
    ImprovedEuler,
    Rk2Ralston,
    Rk3Kutta,
    Heun3,
    Rk4Classical,
    TaylorMultistep,
}

impl IntegratorId {
    pub const ALL: [IntegratorId; 7] = [
        IntegratorId::Euler,
        IntegratorId::ImprovedEuler,
        IntegratorId::Rk2Ralston,
        IntegratorId::Rk3Kutta,
        IntegratorId::Heun3,
        IntegratorId::Rk4Classical,
        IntegratorId::TaylorMultistep,
    ];

    /// Theoretical global convergence order (local truncation order minus one).
    pub fn global_order(self) -> u32 {
        match self {
            IntegratorId::Euler => 1,
            IntegratorId::ImprovedEuler => 2,
            IntegratorId::Rk2Ralston => 2,
            IntegratorId::Rk3Kutta => 3,
            IntegratorId::Heun3 => 3,
            IntegratorId::Rk4Classical => 4,
            IntegratorId::TaylorMultistep => 2,
        }
    }

    /// True for methods that consume a multi-state history window.
    pub fn is_multistep(self) -> bool {
        matches!(self, IntegratorId::TaylorMultistep)
    }

    pub fn token(self) -> &'static str {
        match self {
            IntegratorId::Euler => "euler",
            IntegratorId::ImprovedEuler => "improved-euler",
            IntegratorId::Rk2Ralston => "rk2",
            IntegratorId::Rk3Kutta => "rk3",
            IntegratorId::Heun3 => "heun3",
            IntegratorId::Rk4Classical => "rk4",
            IntegratorId::TaylorMultistep => "tm",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "euler" => Some(IntegratorId::Euler),
            "improved-euler" | "ie" => Some(IntegratorId::ImprovedEuler),
            "rk2" => Some(IntegratorId::Rk2Ralston),
            "rk3" => Some(IntegratorId::Rk3Kutta),
            "heun3" => Some(IntegratorId::Heun3),
            "rk4" => Some(IntegratorId::Rk4Classical),
            "tm" => Some(IntegratorId::TaylorMultistep),
            _ => None,
        }
    }
}

impl fmt::Display for IntegratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Weights applied to the stored states (oldest, middle, newest) by the
/// Taylor multistep update; the derivative term carries weight `τ`.
pub const TM_STATE_WEIGHTS: [f64; 3] = [0.5, -1.0, 1.5];

/// Three consecutive states feeding the Taylor multistep recurrence.
/// `s2` is the newest state, at time `t`; the window spacing is `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct TmHistory {
    s0: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    t: f64,
    tau: f64,
}

impl TmHistory {
    pub fn new(s0: Vec<f64>, s1: Vec<f64>, s2: Vec<f64>, t: f64, tau: f64) -> Result<Self> {
        if s0.len() != s1.len() || s1.len() != s2.len() {
            return Err(OdeError::HistoryShapeMismatch {
                dims: [s0.len(), s1.len(), s2.len()],
                problem: s2.len(),
            });
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(OdeError::InvalidStepSize(tau));
        }
        Ok(Self { s0, s1, s2, t, tau })
    }

    pub fn oldest(&self) -> &[f64] {
        &self.s0
    }

    pub fn middle(&self) -> &[f64] {
        &self.s1
    }

    pub fn newest(&self) -> &[f64] {
        &self.s2
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Shifts the window forward by one step.
    pub fn advance(&mut self, next: Vec<f64>) {
        self.s0 = std::mem::take(&mut self.s1);
        self.s1 = std::mem::replace(&mut self.s2, next);
        self.t += self.tau;
    }
}

fn check_args(problem: &OdeProblem, theta: &[f64], tau: f64) -> Result<()> {
    if theta.len() != problem.dim() {
        return Err(OdeError::InvalidArgument(format!(
            "state dimension {} does not match problem dimension {}",
            theta.len(),
            problem.dim()
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(OdeError::InvalidStepSize(tau));
    }
    Ok(())
}

fn eval_rhs(problem: &OdeProblem, t: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let out = problem.rhs(t, theta);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t, step: None });
    }
    Ok(out)
}

fn finite_state(state: Vec<f64>, t: f64) -> Result<Vec<f64>> {
    if state.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFiniteState { t, step: None });
    }
    Ok(state)
}

fn axpy(theta: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    theta.iter().zip(k).map(|(th, ki)| th + a * ki).collect()
}

/// θ_{l+1} = θ_l + τ·f(t_l, θ_l)
pub fn euler_step(problem: &OdeProblem, t: f64, theta: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    finite_state(axpy(theta, tau, &k1), t)
}

/// Heun form: k₂ = f(t+τ, θ+τk₁), θ_{l+1} = θ_l + (τ/2)(k₁+k₂)
pub fn improved_euler_step(
    problem: &OdeProblem,
    t: f64,
    theta: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    let k2 = eval_rhs(problem, t + tau, &axpy(theta, tau, &k1))?;
    let next = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th + 0.5 * tau * (k1[i] + k2[i]))
        .collect();
    finite_state(next, t)
}

/// Ralston form: k₂ = f(t+2τ/3, θ+(2τ/3)k₁), θ_{l+1} = θ_l + (τ/4)(k₁+3k₂)
pub fn rk2_ralston_step(
    problem: &OdeProblem,
    t: f64,
    theta: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    let k2 = eval_rhs(problem, t + 2.0 * tau / 3.0, &axpy(theta, 2.0 * tau / 3.0, &k1))?;
    let next = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th + 0.25 * tau * (k1[i] + 3.0 * k2[i]))
        .collect();
    finite_state(next, t)
}

/// Stages at τ/3 and 2τ/3, θ_{l+1} = θ_l + (τ/4)(k₁+3k₃)
pub fn heun3_step(problem: &OdeProblem, t: f64, theta: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    let k2 = eval_rhs(problem, t + tau / 3.0, &axpy(theta, tau / 3.0, &k1))?;
    let k3 = eval_rhs(problem, t + 2.0 * tau / 3.0, &axpy(theta, 2.0 * tau / 3.0, &k2))?;
    let next = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th + 0.25 * tau * (k1[i] + 3.0 * k3[i]))
        .collect();
    finite_state(next, t)
}

/// Kutta form: k₃ = f(t+τ, θ−τk₁+2τk₂), θ_{l+1} = θ_l + (τ/6)(k₁+4k₂+k₃)
pub fn rk3_kutta_step(problem: &OdeProblem, t: f64, theta: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    let k2 = eval_rhs(problem, t + 0.5 * tau, &axpy(theta, 0.5 * tau, &k1))?;
    let mid: Vec<f64> = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th - tau * k1[i] + 2.0 * tau * k2[i])
        .collect();
    let k3 = eval_rhs(problem, t + tau, &mid)?;
    let next = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th + tau / 6.0 * (k1[i] + 4.0 * k2[i] + k3[i]))
        .collect();
    finite_state(next, t)
}

/// Classical tableau: weights (1, 2, 2, 1)/6 over stages at 0, τ/2, τ/2, τ.
pub fn rk4_classical_step(
    problem: &OdeProblem,
    t: f64,
    theta: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    check_args(problem, theta, tau)?;
    let k1 = eval_rhs(problem, t, theta)?;
    let k2 = eval_rhs(problem, t + 0.5 * tau, &axpy(theta, 0.5 * tau, &k1))?;
    let k3 = eval_rhs(problem, t + 0.5 * tau, &axpy(theta, 0.5 * tau, &k2))?;
    let k4 = eval_rhs(problem, t + tau, &axpy(theta, tau, &k3))?;
    let next = theta
        .iter()
        .enumerate()
        .map(|(i, th)| th + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    finite_state(next, t)
}

/// Taylor multistep update θ_{l+1} = (3/2)θ_l − θ_{l−1} + (1/2)θ_{l−2} + τ·f(t_l, θ_l).
///
/// Evaluated as θ_l + ½(θ_l − θ_{l−1}) + ½(θ_{l−2} − θ_{l−1}) + τ·f so that a
/// constant history reproduces θ_l bitwise.
pub fn tm_step(problem: &OdeProblem, history: &TmHistory) -> Result<Vec<f64>> {
    if history.newest().len() != problem.dim() {
        return Err(OdeError::HistoryShapeMismatch {
            dims: [
                history.oldest().len(),
                history.middle().len(),
                history.newest().len(),
            ],
            problem: problem.dim(),
        });
    }
    let f = eval_rhs(problem, history.t(), history.newest())?;
    let next = (0..f.len())
        .map(|i| {
            let cur = history.newest()[i];
            let prev = history.middle()[i];
            let prev2 = history.oldest()[i];
            cur + 0.5 * (cur - prev) + 0.5 * (prev2 - prev) + history.tau() * f[i]
        })
        .collect();
    finite_state(next, history.t())
}

/// Dispatches one step of any single-step scheme.
pub fn single_step(
    method: IntegratorId,
    problem: &OdeProblem,
    t: f64,
    theta: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    match method {
        IntegratorId::Euler => euler_step(problem, t, theta, tau),
        IntegratorId::ImprovedEuler => improved_euler_step(problem, t, theta, tau),
        IntegratorId::Rk2Ralston => rk2_ralston_step(problem, t, theta, tau),
        IntegratorId::Rk3Kutta => rk3_kutta_step(problem, t, theta, tau),
        IntegratorId::Heun3 => heun3_step(problem, t, theta, tau),
        IntegratorId::Rk4Classical => rk4_classical_step(problem, t, theta, tau),
        IntegratorId::TaylorMultistep => Err(OdeError::InvalidArgument(
            "taylor multistep requires a history window; use tm_step or integrate".into(),
        )),
    }
}
