//! Fixed-step trajectory generation, including multistep bootstrapping.

use crate::error::{OdeError, Result};
use crate::methods::{single_step, tm_step, IntegratorId, TmHistory};
use crate::problem::OdeProblem;

/// States sampled on a uniform time grid. `states[i]` is the solution at
/// `times[i] = t0 + i·τ`; entry 0 is the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    /// The common spacing, or `None` when the grid is not uniform to a
    /// relative tolerance of 1e-12.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let tau = self.times[1] - self.times[0];
        for w in self.times.windows(2) {
            let d = w[1] - w[0];
            if d <= 0.0 || (d - tau).abs() > 1e-12 * tau.abs().max(1.0) {
                return None;
            }
        }
        Some(tau)
    }
}

/// How the first two steps of a multistep run are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bootstrap {
    /// Run a single-step integrator for the seed steps.
    Method(IntegratorId),
    /// Sample the problem's closed-form solution (order measurement only).
    ExactSolution,
}

/// Integrates `n_steps` fixed steps of size `tau` starting from the problem's
/// initial condition. Single-step methods ignore `bootstrap`; the Taylor
/// multistep method uses it to fill the three-state window (and requires
/// `n_steps ≥ 3`).
pub fn integrate(
    method: IntegratorId,
    problem: &OdeProblem,
    tau: f64,
    n_steps: usize,
    bootstrap: IntegratorId,
) -> Result<Trajectory> {
    integrate_with_bootstrap(method, problem, tau, n_steps, Bootstrap::Method(bootstrap))
}

pub fn integrate_with_bootstrap(
    method: IntegratorId,
    problem: &OdeProblem,
    tau: f64,
    n_steps: usize,
    bootstrap: Bootstrap,
) -> Result<Trajectory> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(OdeError::InvalidStepSize(tau));
    }
    if n_steps < 1 {
        return Err(OdeError::InvalidArgument("n_steps must be at least 1".into()));
    }
    let t0 = problem.t0();
    let grid = |i: usize| t0 + i as f64 * tau;

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
    states.push(problem.theta0().to_vec());

    if method.is_multistep() {
        if n_steps < 3 {
            return Err(OdeError::InvalidArgument(
                "taylor multistep needs n_steps >= 3".into(),
            ));
        }
        for i in 1..=2 {
            let next = match bootstrap {
                Bootstrap::Method(m) => {
                    if m.is_multistep() {
                        return Err(OdeError::InvalidArgument(
                            "bootstrap must be a single-step method".into(),
                        ));
                    }
                    single_step(m, problem, grid(i - 1), &states[i - 1], tau)
                        .map_err(|e| at_step(e, i))?
                }
                Bootstrap::ExactSolution => {
                    problem
                        .exact(grid(i))
                        .ok_or_else(|| OdeError::MissingExactSolution {
                            problem: problem.name().to_string(),
                        })?
                }
            };
            states.push(next);
        }
        let mut history = TmHistory::new(
            states[0].clone(),
            states[1].clone(),
            states[2].clone(),
            grid(2),
            tau,
        )?;
        for i in 3..=n_steps {
            let next = tm_step(problem, &history).map_err(|e| at_step(e, i))?;
            states.push(next.clone());
            history.advance(next);
        }
    } else {
        for i in 1..=n_steps {
            let next = single_step(method, problem, grid(i - 1), &states[i - 1], tau)
                .map_err(|e| at_step(e, i))?;
            states.push(next);
        }
    }

    let times = (0..=n_steps).map(grid).collect();
    Ok(Trajectory { times, states })
}

fn at_step(err: OdeError, step: usize) -> OdeError {
    match err {
        OdeError::NonFiniteState { t, .. } => OdeError::NonFiniteState {
            t,
            step: Some(step),
        },
        other => other,
    }
}
