//! Convergence-order and polynomial-exactness checks over the full catalog.

use ode_core::{
    empirical_order, integrate_with_bootstrap, Bootstrap, IntegratorId, OdeProblem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Problem whose exact solution is the polynomial Σ cᵢ tⁱ, posed in
/// quadrature form θ' = p'(t).
fn poly_problem(coeffs: &[f64], t0: f64) -> OdeProblem {
    let c = coeffs.to_vec();
    let eval = move |t: f64, c: &[f64]| -> f64 {
        let mut acc = 0.0;
        for ci in c.iter().rev() {
            acc = acc * t + ci;
        }
        acc
    };
    let c_rhs = c.clone();
    let c_exact = c.clone();
    let eval_rhs = eval.clone();
    let theta0 = eval(t0, &c);
    OdeProblem::new("poly", t0, vec![theta0], move |t, _| {
        let deriv: Vec<f64> = c_rhs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, ci)| i as f64 * ci)
            .collect();
        vec![eval_rhs(t, &deriv)]
    })
    .with_exact(move |t| vec![eval(t, &c_exact)])
}

#[test]
fn fitted_orders_match_theory_on_decay_sin() {
    let p = OdeProblem::decay_sin();
    let taus = [0.1, 0.05, 0.025, 0.0125];
    for method in IntegratorId::ALL {
        let est = empirical_order(method, &p, &taus, 2.0).unwrap();
        let expect = method.global_order() as f64;
        assert!(
            (est.slope - expect).abs() < 0.3,
            "{method}: slope {} vs order {expect}",
            est.slope
        );
    }
}

#[test]
fn multistep_order_separates_from_euler() {
    let p = OdeProblem::decay_sin();
    let taus = [0.1, 0.05, 0.025, 0.0125];
    let euler = empirical_order(IntegratorId::Euler, &p, &taus, 2.0).unwrap();
    let tm = empirical_order(IntegratorId::TaylorMultistep, &p, &taus, 2.0).unwrap();
    assert!(
        tm.slope - euler.slope >= 0.7,
        "tm {} vs euler {}",
        tm.slope,
        euler.slope
    );
}

#[test]
fn vector_problem_orders_hold() {
    let p = OdeProblem::circle();
    let taus = [0.2, 0.1, 0.05, 0.025];
    let rk4 = empirical_order(IntegratorId::Rk4Classical, &p, &taus, 2.0).unwrap();
    assert!((rk4.slope - 4.0).abs() < 0.3, "slope {}", rk4.slope);
    let tm = empirical_order(IntegratorId::TaylorMultistep, &p, &taus, 2.0).unwrap();
    assert!((tm.slope - 2.0).abs() < 0.3, "slope {}", tm.slope);
}

#[test]
fn polynomial_exactness_per_method_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0d0e_c0de);
    for method in IntegratorId::ALL {
        let degree = method.global_order() as usize;
        for _ in 0..25 {
            let coeffs: Vec<f64> =
                (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t0: f64 = rng.gen_range(-1.0..1.0);
            let tau: f64 = rng.gen_range(0.05..0.2);
            let n: usize = rng.gen_range(3..=8);
            let p = poly_problem(&coeffs, t0);
            let traj =
                integrate_with_bootstrap(method, &p, tau, n, Bootstrap::ExactSolution)
                    .unwrap();
            let exact = p.exact(t0 + n as f64 * tau).unwrap()[0];
            let got = traj.terminal()[0];
            let rel = (got - exact).abs() / exact.abs().max(1.0);
            assert!(
                rel <= 1e-12,
                "{method} degree {degree}: rel err {rel} (coeffs {coeffs:?})"
            );
        }
    }
}
