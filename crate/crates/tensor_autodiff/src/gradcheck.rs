//! Central-difference validation of reverse-mode gradients.

use crate::params::ParamStore;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Outcome of a finite-difference sweep. A failing check is a report, not an
/// error; callers compare `max_rel_error` against their tolerance.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Compares every parameter's reverse-mode gradient against central finite
/// differences of the loss, sampling at most `max_coords_per_param` evenly
/// spaced coordinates per tensor. `loss_fn` must build the same scalar loss
/// from the store every time it is called (64-bit mode).
pub fn grad_check<F>(
    store: &mut ParamStore<f64>,
    epsilon: f64,
    max_coords_per_param: usize,
    loss_fn: F,
) -> GradCheckReport
where
    F: Fn(&ParamStore<f64>, &mut Tape<f64>) -> NodeId,
{
    store.zero_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(store, &mut tape);
    tape.backward(loss, store).expect("loss must be scalar");

    let reverse: Vec<Tensor<f64>> = store.iter().map(|(_, p)| p.grad.clone()).collect();
    let names: Vec<String> = store.iter().map(|(_, p)| p.name.clone()).collect();
    let param_count = store.len();

    let eval = |store: &ParamStore<f64>| -> f64 {
        let mut tape = Tape::new();
        let loss = loss_fn(store, &mut tape);
        tape.value(loss).scalar_value()
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        coords_checked: 0,
    };

    for pi in 0..param_count {
        let numel = store.iter().nth(pi).map(|(_, p)| p.value.numel()).unwrap();
        let n_samples = numel.min(max_coords_per_param);
        for s in 0..n_samples {
            let coord = s * numel / n_samples;
            let id = crate::params::ParamId(pi);
            let original = store.get(id).value.data()[coord];

            store.get_mut(id).value.data_mut()[coord] = original + epsilon;
            let plus = eval(store);
            store.get_mut(id).value.data_mut()[coord] = original - epsilon;
            let minus = eval(store);
            store.get_mut(id).value.data_mut()[coord] = original;

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
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_conv_layer_passes() {
        let mut store = ParamStore::new();
        let w = store.register(
            "conv.weight",
            Tensor::from_vec(
                &[2, 1, 3, 3],
                (0..18).map(|i| (i as f64 * 0.37).sin() * 0.5).collect(),
            ),
        );
        let x = Tensor::from_vec(
            &[1, 1, 4, 4],
            (0..16).map(|i| (i as f64 * 0.61).cos()).collect(),
        );
        let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
            let xn = tape.input(x.clone());
            let wn = tape.param(store, w);
            let y = tape.conv2d(xn, wn, 1, 1).unwrap();
            let r = tape.relu(y);
            tape.sum(r)
        });
        assert!(report.passes(1e-4), "max rel err {}", report.max_rel_error);
        assert!(report.coords_checked >= 18);
    }

    #[test]
    fn zero_input_kills_conv_grads() {
        let mut store = ParamStore::new();
        let w = store.register("conv.weight", Tensor::filled(&[2, 1, 3, 3], 0.3_f64));
        let x = Tensor::zeros(&[1, 1, 4, 4]);
        let report = grad_check(&mut store, 1e-5, 64, |store, tape| {
            let xn = tape.input(x.clone());
            let wn = tape.param(store, w);
            let y = tape.conv2d(xn, wn, 1, 1).unwrap();
            tape.sum(y)
        });
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(store.get(w).grad.data().iter().sum::<f64>(), 0.0);
    }
}
