//! Empirical convergence-order estimation from a step-size sweep.

use crate::error::{OdeError, Result};
use crate::integrate::{integrate_with_bootstrap, Bootstrap};
use crate::methods::IntegratorId;
use crate::problem::OdeProblem;

/// A fitted log-log slope over (step size, terminal error) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// Step sizes, strictly decreasing.
    pub taus: Vec<f64>,
    /// Max-norm terminal errors, one per step size.
    pub errors: Vec<f64>,
    /// Least-squares slope of log(error) against log(τ).
    pub slope: f64,
}

impl OrderEstimate {
    /// Recomputes the slope from the stored pairs.
    pub fn refit_slope(&self) -> f64 {
        loglog_slope(&self.taus, &self.errors)
    }
}

/// Least-squares slope of ln(errors) against ln(taus).
pub fn loglog_slope(taus: &[f64], errors: &[f64]) -> f64 {
    let n = taus.len() as f64;
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - xm) * (y - ym);
        den += (x - xm) * (x - xm);
    }
    num / den
}

/// Integrates `problem` to `t0 + horizon` for each step size and fits the
/// convergence order from the terminal max-norm errors.
///
/// Requires an exact solution, at least four step sizes whose span covers at
/// least three halvings (max/min ≥ 8), and that every step size divides the
/// horizon. Taylor multistep runs are seeded from the exact solution so the
/// fitted slope reflects that method alone.
pub fn empirical_order(
    method: IntegratorId,
    problem: &OdeProblem,
    taus: &[f64],
    horizon: f64,
) -> Result<OrderEstimate> {
    if !problem.has_exact() {
        return Err(OdeError::MissingExactSolution {
            problem: problem.name().to_string(),
        });
    }
    if taus.len() < 4 {
        return Err(OdeError::InvalidArgument(
            "order fitting needs at least 4 step sizes".into(),
        ));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("step sizes must be comparable"));
    for w in sorted.windows(2) {
        if w[0] <= w[1] {
            return Err(OdeError::InvalidArgument("duplicate step sizes".into()));
        }
    }
    let (max, min) = (sorted[0], *sorted.last().expect("non-empty"));
    if !(min > 0.0) {
        return Err(OdeError::InvalidStepSize(min));
    }
    if max / min < 8.0 * (1.0 - 1e-12) {
        return Err(OdeError::InvalidArgument(
            "step sizes must span at least a factor of 8".into(),
        ));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(OdeError::InvalidArgument("horizon must be positive".into()));
    }

    let target = problem
        .exact(problem.t0() + horizon)
        .expect("presence checked above");
    let bootstrap = if method.is_multistep() {
        Bootstrap::ExactSolution
    } else {
        Bootstrap::Method(IntegratorId::Rk4Classical)
    };

    let mut errors = Vec::with_capacity(sorted.len());
    for &tau in &sorted {
        let n = (horizon / tau).round();
        if (n * tau - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
            return Err(OdeError::InvalidArgument(format!(
                "step size {tau} does not divide horizon {horizon}"
            )));
        }
        let traj = integrate_with_bootstrap(method, problem, tau, n as usize, bootstrap)?;
        let err = traj
            .terminal()
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        errors.push(err);
    }

    if errors.iter().all(|e| *e < 1e-14) || errors.iter().any(|e| *e <= 0.0) {
        return Err(OdeError::DegenerateFit);
    }

    let slope = loglog_slope(&sorted, &errors);
    Ok(OrderEstimate {
        taus: sorted,
        errors,
        slope,
    })
}
