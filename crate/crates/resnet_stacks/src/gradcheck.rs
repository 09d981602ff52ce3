//! Finite-difference sweep over every parameter of a built model.

use crate::error::Result;
use crate::model::Model;
use tensor_autodiff::{GradCheckReport, ParamId, Tensor};

/// Validates a 64-bit model's reverse-mode gradients against central
/// differences of the eval-mode cross-entropy loss, sampling at most
/// `max_coords_per_param` coordinates per tensor. Eval mode keeps batch-norm
/// statistics frozen, so the checked function is exactly differentiable.
pub fn check_model_gradients(
    model: &mut Model<f64>,
    batch: &Tensor<f64>,
    labels: &[usize],
    epsilon: f64,
    max_coords_per_param: usize,
) -> Result<GradCheckReport> {
    let loss_of = |m: &Model<f64>| -> Result<f64> {
        let (mut tape, logits) = m.forward_eval(batch)?;
        let loss = tape.softmax_cross_entropy(logits, labels)?;
        Ok(tape.value(loss).scalar_value())
    };

    model.store_mut().zero_grads();
    {
        let (mut tape, logits) = model.forward_eval(batch)?;
        let loss = tape.softmax_cross_entropy(logits, labels)?;
        tape.backward(loss, model.store_mut())?;
    }
    let reverse: Vec<Tensor<f64>> = model.store().iter().map(|(_, p)| p.grad.clone()).collect();
    let names: Vec<String> = model.store().iter().map(|(_, p)| p.name.clone()).collect();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        coords_checked: 0,
    };
    for pi in 0..names.len() {
        let id = ParamId(pi);
        let numel = model.store().get(id).value.numel();
        let samples = numel.min(max_coords_per_param);
        for s in 0..samples {
            let coord = s * numel / samples;
            let original = model.store().get(id).value.data()[coord];
            model.store_mut().get_mut(id).value.data_mut()[coord] = original + epsilon;
            let plus = loss_of(model)?;
            model.store_mut().get_mut(id).value.data_mut()[coord] = original - epsilon;
            let minus = loss_of(model)?;
            model.store_mut().get_mut(id).value.data_mut()[coord] = original;

            let fd = (plus - minus) / (2.0 * epsilon);
            let ad = reverse[pi].data()[coord];
            let rel = (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-6);
            report.coords_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = names[pi].clone();
            }
        }
    }
    Ok(report)
}
