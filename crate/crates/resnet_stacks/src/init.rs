//! Seed-deterministic parameter initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::{Dtype, Tensor};

/// Draws Kaiming fan-in normal weights from a seeded stream; bitwise
/// reproducible for a given seed and registration order.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn standard_normal(&mut self) -> f64 {
        // Box–Muller on two uniforms; u1 kept away from zero.
        let u1: f64 = self.rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// N(0, 2/fan_in) tensor of the given shape.
    pub fn kaiming<T: Dtype>(&mut self, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let std = (2.0 / fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::cast(self.standard_normal() * std))
            .collect();
        Tensor::from_vec(shape, data)
    }
}
