//! Synthetic class-conditional blob images for desk-scale training.

use crate::dataset::DatasetRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::Tensor;

const NOISE_SIGMA: f64 = 0.1;

/// Deterministically generates `n` RGB images of `size`×`size` pixels.
/// Class k carries a bright Gaussian blob at a class-specific location on a
/// ring; labels are assigned round-robin, so every class gets ⌈n/classes⌉
/// or ⌊n/classes⌋ records.
pub fn synth_dataset(seed: u64, n: usize, classes: usize, size: usize) -> Vec<DatasetRecord> {
    assert!(classes >= 2, "need at least 2 classes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ring = size as f64 / 4.0;
    let sigma = size as f64 / 6.0;
    let centers: Vec<(f64, f64)> = (0..classes)
        .map(|k| {
            let angle = std::f64::consts::TAU * k as f64 / classes as f64;
            (
                size as f64 / 2.0 + ring * angle.cos(),
                size as f64 / 2.0 + ring * angle.sin(),
            )
        })
        .collect();

    (0..n)
        .map(|i| {
            let label = i % classes;
            let (cy, cx) = centers[label];
            let mut data = Vec::with_capacity(3 * size * size);
            for _c in 0..3 {
                for y in 0..size {
                    for x in 0..size {
                        let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                        let signal = 0.1 + 0.8 * (-d2 / (2.0 * sigma * sigma)).exp();
                        let noise = NOISE_SIGMA * standard_normal(&mut rng);
                        data.push((signal + noise).clamp(0.0, 1.0) as f32);
                    }
                }
            }
            DatasetRecord {
                image: Tensor::from_vec(&[3, size, size], data),
                label,
            }
        })
        .collect()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
