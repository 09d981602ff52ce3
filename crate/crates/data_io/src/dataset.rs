//! Records, batching, and the named preprocessing options.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tensor_autodiff::Tensor;

/// One labeled image, pixels scaled to [0, 1], shape C×H×W.
#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub image: Tensor<f32>,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Conventional CIFAR-10 channel statistics for the optional mean/std
/// normalization (off by default).
pub const CIFAR_MEAN: [f32; 3] = [0.4914, 0.4822, 0.4465];
pub const CIFAR_STD: [f32; 3] = [0.2470, 0.2435, 0.2616];

/// In-place per-channel (x − mean) / std.
pub fn normalize_records(records: &mut [DatasetRecord], mean: &[f32], std: &[f32]) {
    for rec in records {
        let c = rec.image.shape()[0];
        let plane: usize = rec.image.shape()[1..].iter().product();
        for ci in 0..c.min(mean.len()) {
            for v in &mut rec.image.data_mut()[ci * plane..(ci + 1) * plane] {
                *v = (*v - mean[ci]) / std[ci];
            }
        }
    }
}

/// Zero-pad by `pad`, crop back to the original size at a random offset,
/// then flip horizontally with probability 1/2.
pub fn random_crop_flip(image: &Tensor<f32>, pad: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
    let (c, h, w) = (image.shape()[0], image.shape()[1], image.shape()[2]);
    let dy = rng.gen_range(0..=2 * pad);
    let dx = rng.gen_range(0..=2 * pad);
    let flip = rng.gen_bool(0.5);
    let mut out = Tensor::zeros(image.shape());
    for ci in 0..c {
        for y in 0..h {
            // Source row in the padded frame; zero outside the original.
            let sy = y + dy;
            if sy < pad || sy >= h + pad {
                continue;
            }
            for x in 0..w {
                let sx = x + dx;
                if sx < pad || sx >= w + pad {
                    continue;
                }
                let src = (ci * h + (sy - pad)) * w + (sx - pad);
                let tx = if flip { w - 1 - x } else { x };
                out.data_mut()[(ci * h + y) * w + tx] = image.data()[src];
            }
        }
    }
    out
}

/// Stacks the selected records into an NCHW batch plus labels.
pub fn stack_batch(records: &[DatasetRecord], indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
    assert!(!indices.is_empty(), "empty batch");
    let shape = records[indices[0]].image.shape();
    let mut batch_shape = vec![indices.len()];
    batch_shape.extend_from_slice(shape);
    let mut data = Vec::with_capacity(batch_shape.iter().product());
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend_from_slice(records[i].image.data());
        labels.push(records[i].label);
    }
    (Tensor::from_vec(&batch_shape, data), labels)
}
