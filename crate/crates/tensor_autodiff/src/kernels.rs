//! Forward and backward math for each layer, shared by the tape ops.

use crate::error::{AdError, Result};
use crate::tensor::{Dtype, Tensor};

/// Output indices `q` for which `q·stride + offset − pad` lands inside
/// `0..in_len`.
fn valid_out_range(
    in_len: usize,
    offset: usize,
    pad: usize,
    stride: usize,
    out_len: usize,
) -> std::ops::Range<usize> {
    let lo = if offset >= pad {
        0
    } else {
        (pad - offset).div_ceil(stride)
    };
    if in_len + pad <= offset {
        return 0..0;
    }
    let hi_incl = (in_len - 1 + pad - offset) / stride;
    lo..out_len.min(hi_incl + 1)
}

pub fn conv2d_out_shape(
    input: &[usize],
    weight: &[usize],
    stride: usize,
    padding: usize,
) -> Result<Vec<usize>> {
    let [n, c, h, w] = match *input {
        [a, b, c, d] => [a, b, c, d],
        _ => {
            return Err(AdError::ShapeMismatch {
                context: "conv2d input must be NCHW",
                expected: vec![4],
                got: input.to_vec(),
            })
        }
    };
    let [o, ci, kh, kw] = match *weight {
        [a, b, c, d] => [a, b, c, d],
        _ => {
            return Err(AdError::ShapeMismatch {
                context: "conv2d weight must be OCKK",
                expected: vec![4],
                got: weight.to_vec(),
            })
        }
    };
    if ci != c {
        return Err(AdError::ShapeMismatch {
            context: "conv2d channel mismatch",
            expected: input.to_vec(),
            got: weight.to_vec(),
        });
    }
    if kh != kw || !(kh == 1 || kh == 3) {
        return Err(AdError::Unsupported(format!(
            "conv2d kernel must be 1x1 or 3x3, got {kh}x{kw}"
        )));
    }
    if stride != 1 && stride != 2 {
        return Err(AdError::Unsupported(format!("conv2d stride {stride}")));
    }
    if h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(AdError::ShapeMismatch {
            context: "conv2d spatial extent smaller than kernel",
            expected: weight.to_vec(),
            got: input.to_vec(),
        });
    }
    let oh = (h + 2 * padding - kh) / stride + 1;
    let ow = (w + 2 * padding - kw) / stride + 1;
    Ok(vec![n, o, oh, ow])
}

/// Cross-correlation (no kernel flip), zero padding, no bias.
pub fn conv2d_forward<T: Dtype>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
) -> Result<Tensor<T>> {
    let out_shape = conv2d_out_shape(x.shape(), weight.shape(), stride, padding)?;
    let [n, c, h, w] = x.dims4("conv2d input")?;
    let [o, _, k, _] = weight.dims4("conv2d weight")?;
    let (oh, ow) = (out_shape[2], out_shape[3]);

    let mut out = Tensor::zeros(&out_shape);
    let xs = x.data();
    let ws = weight.data();
    let os = out.data_mut();
    for ni in 0..n {
        for oc in 0..o {
            let out_base = (ni * o + oc) * oh * ow;
            for ic in 0..c {
                let x_base = (ni * c + ic) * h * w;
                let w_base = (oc * c + ic) * k * k;
                for kr in 0..k {
                    let rows = valid_out_range(h, kr, padding, stride, oh);
                    for kc in 0..k {
                        let wv = ws[w_base + kr * k + kc];
                        let cols = valid_out_range(w, kc, padding, stride, ow);
                        if cols.is_empty() {
                            continue;
                        }
                        for ohi in rows.clone() {
                            let ih = ohi * stride + kr - padding;
                            let x_row = x_base + ih * w;
                            let o_row = out_base + ohi * ow;
                            if stride == 1 {
                                let iw0 = cols.start + kc - padding;
                                let src = &xs[x_row + iw0..x_row + iw0 + cols.len()];
                                let dst = &mut os[o_row + cols.start..o_row + cols.end];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d = *d + wv * *s;
                                }
                            } else {
                                for owi in cols.clone() {
                                    let iw = owi * stride + kc - padding;
                                    os[o_row + owi] = os[o_row + owi] + wv * xs[x_row + iw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of conv2d with respect to its input and weight.
pub fn conv2d_backward<T: Dtype>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    stride: usize,
    padding: usize,
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = x.dims4("conv2d input")?;
    let [o, _, k, _] = weight.dims4("conv2d weight")?;
    let [_, _, oh, ow] = gout.dims4("conv2d grad")?;

    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(weight.shape());
    let xs = x.data();
    let ws = weight.data();
    let gs = gout.data();
    {
        let gxd = gx.data_mut();
        for ni in 0..n {
            for oc in 0..o {
                let g_base = (ni * o + oc) * oh * ow;
                for ic in 0..c {
                    let x_base = (ni * c + ic) * h * w;
                    let w_base = (oc * c + ic) * k * k;
                    for kr in 0..k {
                        let rows = valid_out_range(h, kr, padding, stride, oh);
                        for kc in 0..k {
                            let wv = ws[w_base + kr * k + kc];
                            let cols = valid_out_range(w, kc, padding, stride, ow);
                            if cols.is_empty() {
                                continue;
                            }
                            for ohi in rows.clone() {
                                let ih = ohi * stride + kr - padding;
                                let x_row = x_base + ih * w;
                                let g_row = g_base + ohi * ow;
                                if stride == 1 {
                                    let iw0 = cols.start + kc - padding;
                                    let dst = &mut gxd[x_row + iw0..x_row + iw0 + cols.len()];
                                    let src = &gs[g_row + cols.start..g_row + cols.end];
                                    for (d, s) in dst.iter_mut().zip(src) {
                                        *d = *d + wv * *s;
                                    }
                                } else {
                                    for owi in cols.clone() {
                                        let iw = owi * stride + kc - padding;
                                        gxd[x_row + iw] =
                                            gxd[x_row + iw] + wv * gs[g_row + owi];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    {
        let gwd = gw.data_mut();
        for ni in 0..n {
            for oc in 0..o {
                let g_base = (ni * o + oc) * oh * ow;
                for ic in 0..c {
                    let x_base = (ni * c + ic) * h * w;
                    let w_base = (oc * c + ic) * k * k;
                    for kr in 0..k {
                        let rows = valid_out_range(h, kr, padding, stride, oh);
                        for kc in 0..k {
                            let cols = valid_out_range(w, kc, padding, stride, ow);
                            if cols.is_empty() {
                                continue;
                            }
                            let mut acc = T::zero();
                            for ohi in rows.clone() {
                                let ih = ohi * stride + kr - padding;
                                let x_row = x_base + ih * w;
                                let g_row = g_base + ohi * ow;
                                if stride == 1 {
                                    let iw0 = cols.start + kc - padding;
                                    let src = &xs[x_row + iw0..x_row + iw0 + cols.len()];
                                    let grd = &gs[g_row + cols.start..g_row + cols.end];
                                    for (a, b) in src.iter().zip(grd) {
                                        acc = acc + *a * *b;
                                    }
                                } else {
                                    for owi in cols.clone() {
                                        let iw = owi * stride + kc - padding;
                                        acc = acc + xs[x_row + iw] * gs[g_row + owi];
                                    }
                                }
                            }
                            gwd[w_base + kr * k + kc] = gwd[w_base + kr * k + kc] + acc;
                        }
                    }
                }
            }
        }
    }
    Ok((gx, gw))
}

pub struct BnStats<T> {
    pub mean: Vec<T>,
    /// Biased (population) variance over N×H×W per channel.
    pub var: Vec<T>,
    pub invstd: Vec<T>,
}

/// Per-channel batch statistics of an NCHW tensor.
pub fn bn_batch_stats<T: Dtype>(x: &Tensor<T>, eps: f64) -> Result<BnStats<T>> {
    let [n, c, h, w] = x.dims4("batch_norm input")?;
    let m = n * h * w;
    if m == 0 {
        return Err(AdError::EmptyBatch);
    }
    let minv = T::cast(1.0 / m as f64);
    let epsv = T::cast(eps);
    let xs = x.data();
    let plane = h * w;
    let mut mean = vec![T::zero(); c];
    let mut var = vec![T::zero(); c];
    for ci in 0..c {
        let mut acc = T::zero();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for v in &xs[base..base + plane] {
                acc = acc + *v;
            }
        }
        mean[ci] = acc * minv;
    }
    for ci in 0..c {
        let mu = mean[ci];
        let mut acc = T::zero();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for v in &xs[base..base + plane] {
                let d = *v - mu;
                acc = acc + d * d;
            }
        }
        var[ci] = acc * minv;
    }
    let invstd = var
        .iter()
        .map(|v| T::one() / (*v + epsv).sqrt())
        .collect();
    Ok(BnStats { mean, var, invstd })
}

/// y = γ·(x − mean)·invstd + β with per-channel mean/invstd.
pub fn bn_apply<T: Dtype>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mean: &[T],
    invstd: &[T],
) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("batch_norm input")?;
    if gamma.numel() != c || beta.numel() != c || mean.len() != c || invstd.len() != c {
        return Err(AdError::ShapeMismatch {
            context: "batch_norm per-channel parameters",
            expected: vec![c],
            got: vec![gamma.numel(), beta.numel()],
        });
    }
    let plane = h * w;
    let mut out = Tensor::zeros(x.shape());
    let xs = x.data();
    let os = out.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let g = gamma.data()[ci];
            let b = beta.data()[ci];
            let mu = mean[ci];
            let is = invstd[ci];
            let base = (ni * c + ci) * plane;
            for i in base..base + plane {
                os[i] = g * (xs[i] - mu) * is + b;
            }
        }
    }
    Ok(out)
}

/// Train-mode batch-norm backward (gradients flow through the statistics).
pub fn bn_backward_train<T: Dtype>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    mean: &[T],
    invstd: &[T],
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = x.dims4("batch_norm input")?;
    let plane = h * w;
    let m = T::cast((n * plane) as f64);
    let xs = x.data();
    let gs = gout.data();
    let mut gx = Tensor::zeros(x.shape());
    let mut ggamma = Tensor::zeros(gamma.shape());
    let mut gbeta = Tensor::zeros(gamma.shape());
    for ci in 0..c {
        let mu = mean[ci];
        let is = invstd[ci];
        let g = gamma.data()[ci];
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in base..base + plane {
                let xhat = (xs[i] - mu) * is;
                sum_g = sum_g + gs[i];
                sum_gx = sum_gx + gs[i] * xhat;
            }
        }
        ggamma.data_mut()[ci] = sum_gx;
        gbeta.data_mut()[ci] = sum_g;
        let mean_g = sum_g / m;
        let mean_gx = sum_gx / m;
        let gxd = gx.data_mut();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in base..base + plane {
                let xhat = (xs[i] - mu) * is;
                gxd[i] = g * is * (gs[i] - mean_g - xhat * mean_gx);
            }
        }
    }
    Ok((gx, ggamma, gbeta))
}

/// Eval-mode batch-norm backward (running statistics are constants).
pub fn bn_backward_eval<T: Dtype>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    mean: &[T],
    invstd: &[T],
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [n, c, h, w] = x.dims4("batch_norm input")?;
    let plane = h * w;
    let xs = x.data();
    let gs = gout.data();
    let mut gx = Tensor::zeros(x.shape());
    let mut ggamma = Tensor::zeros(gamma.shape());
    let mut gbeta = Tensor::zeros(gamma.shape());
    for ci in 0..c {
        let mu = mean[ci];
        let is = invstd[ci];
        let g = gamma.data()[ci];
        let mut sum_g = T::zero();
        let mut sum_gx = T::zero();
        let gxd = gx.data_mut();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for i in base..base + plane {
                let xhat = (xs[i] - mu) * is;
                sum_g = sum_g + gs[i];
                sum_gx = sum_gx + gs[i] * xhat;
                gxd[i] = g * is * gs[i];
            }
        }
        ggamma.data_mut()[ci] = sum_gx;
        gbeta.data_mut()[ci] = sum_g;
    }
    Ok((gx, ggamma, gbeta))
}

pub fn relu_forward<T: Dtype>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Subgradient convention: derivative at exactly 0 is 0.
pub fn relu_backward<T: Dtype>(x: &Tensor<T>, gout: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(x.shape());
    for ((g, xv), o) in gx
        .data_mut()
        .iter_mut()
        .zip(x.data())
        .zip(gout.data())
    {
        if *xv > T::zero() {
            *g = *o;
        }
    }
    gx
}

/// x: N×D, weight: O×D, bias: O → N×O.
pub fn linear_forward<T: Dtype>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let [n, d] = x.dims2("linear input")?;
    let [o, dw] = weight.dims2("linear weight")?;
    if dw != d || bias.numel() != o {
        return Err(AdError::ShapeMismatch {
            context: "linear weight/bias",
            expected: vec![o, d],
            got: weight.shape().to_vec(),
        });
    }
    let mut out = Tensor::zeros(&[n, o]);
    let xs = x.data();
    let ws = weight.data();
    let bs = bias.data();
    let os = out.data_mut();
    for ni in 0..n {
        for oi in 0..o {
            let mut acc = bs[oi];
            let xrow = ni * d;
            let wrow = oi * d;
            for di in 0..d {
                acc = acc + xs[xrow + di] * ws[wrow + di];
            }
            os[ni * o + oi] = acc;
        }
    }
    Ok(out)
}

pub fn linear_backward<T: Dtype>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    gout: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [n, d] = x.dims2("linear input")?;
    let [o, _] = weight.dims2("linear weight")?;
    let mut gx = Tensor::zeros(&[n, d]);
    let mut gw = Tensor::zeros(weight.shape());
    let mut gb = Tensor::zeros(&[o]);
    let xs = x.data();
    let ws = weight.data();
    let gs = gout.data();
    for ni in 0..n {
        for oi in 0..o {
            let g = gs[ni * o + oi];
            gb.data_mut()[oi] = gb.data_mut()[oi] + g;
            let xrow = ni * d;
            let wrow = oi * d;
            for di in 0..d {
                gx.data_mut()[xrow + di] = gx.data_mut()[xrow + di] + g * ws[wrow + di];
                gw.data_mut()[wrow + di] = gw.data_mut()[wrow + di] + g * xs[xrow + di];
            }
        }
    }
    Ok((gx, gw, gb))
}

/// NCHW → NC, mean over the spatial plane.
pub fn global_avg_pool_forward<T: Dtype>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4("global_avg_pool input")?;
    let plane = h * w;
    if plane == 0 {
        return Err(AdError::EmptyBatch);
    }
    let inv = T::cast(1.0 / plane as f64);
    let mut out = Tensor::zeros(&[n, c]);
    let xs = x.data();
    let os = out.data_mut();
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * plane;
            let mut acc = T::zero();
            for v in &xs[base..base + plane] {
                acc = acc + *v;
            }
            os[ni * c + ci] = acc * inv;
        }
    }
    Ok(out)
}

pub fn global_avg_pool_backward<T: Dtype>(
    x_shape: &[usize],
    gout: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (h, w) = (x_shape[2], x_shape[3]);
    let plane = h * w;
    let inv = T::cast(1.0 / plane as f64);
    let mut gx = Tensor::zeros(x_shape);
    let gs = gout.data();
    let gxd = gx.data_mut();
    for (i, g) in gs.iter().enumerate() {
        let base = i * plane;
        let gv = *g * inv;
        for slot in &mut gxd[base..base + plane] {
            *slot = gv;
        }
    }
    Ok(gx)
}

/// Mean over the batch of −log softmax(logits)[label], with max subtraction.
/// Returns the scalar loss and the softmax probabilities for backward.
pub fn softmax_cross_entropy_forward<T: Dtype>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    let [n, c] = logits.dims2("softmax_cross_entropy logits")?;
    if n == 0 {
        return Err(AdError::EmptyBatch);
    }
    if labels.len() != n {
        return Err(AdError::ShapeMismatch {
            context: "softmax_cross_entropy labels",
            expected: vec![n],
            got: vec![labels.len()],
        });
    }
    if let Some(&bad) = labels.iter().find(|l| **l >= c) {
        return Err(AdError::InvalidLabel {
            label: bad,
            classes: c,
        });
    }
    let xs = logits.data();
    let mut probs = Tensor::zeros(&[n, c]);
    let mut loss = T::zero();
    for ni in 0..n {
        let row = &xs[ni * c..(ni + 1) * c];
        let max = row.iter().fold(row[0], |m, v| if *v > m { *v } else { m });
        let mut denom = T::zero();
        for v in row {
            denom = denom + (*v - max).exp();
        }
        let log_denom = denom.ln();
        for (j, v) in row.iter().enumerate() {
            probs.data_mut()[ni * c + j] = (*v - max).exp() / denom;
        }
        loss = loss - (row[labels[ni]] - max - log_denom);
    }
    Ok((loss / T::cast(n as f64), probs))
}

pub fn softmax_cross_entropy_backward<T: Dtype>(
    probs: &Tensor<T>,
    labels: &[usize],
    gout: T,
) -> Tensor<T> {
    let n = labels.len();
    let c = probs.numel() / n;
    let scale = gout / T::cast(n as f64);
    let mut gx = probs.clone();
    for ni in 0..n {
        let slot = &mut gx.data_mut()[ni * c + labels[ni]];
        *slot = *slot - T::one();
    }
    for v in gx.data_mut() {
        *v = *v * scale;
    }
    gx
}
