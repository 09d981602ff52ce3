//! Zero-stability probe for the Taylor multistep recurrence.

/// Runs the homogeneous recurrence θ_{l+1} = 1.5θ_l − θ_{l−1} + 0.5θ_{l−2}
/// from the seed window (1+perturbation, 1, 1) — the oldest entry perturbed —
/// and returns |θ_l − 1| for l = 0..=n_steps.
///
/// The parasitic roots of z³ − 1.5z² + z − 0.5 have modulus √0.5, so the
/// transient decays geometrically and every deviation stays below
/// 10·perturbation; the persistent component is half the perturbation.
pub fn tm_stability_probe(perturbation: f64, n_steps: usize) -> Vec<f64> {
    let mut window = [1.0 + perturbation, 1.0, 1.0];
    let mut deviations = Vec::with_capacity(n_steps + 1);
    for seed in window.iter().take((n_steps + 1).min(3)) {
        deviations.push((seed - 1.0).abs());
    }
    for _ in 3..=n_steps {
        let [s0, s1, s2] = window;
        // Same difference arrangement as tm_step: exact on a constant window.
        let next = s2 + 0.5 * (s2 - s1) + 0.5 * (s0 - s1);
        deviations.push((next - 1.0).abs());
        window = [s1, s2, next];
    }
    deviations
}
