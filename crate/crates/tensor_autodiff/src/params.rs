//! Named trainable parameters with accumulated gradients.

use crate::error::{AdError, Result};
use crate::tensor::{Dtype, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// A trainable tensor plus its gradient accumulator, registered under a
/// path such as `stage2.block3.conv1.weight`.
#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// Registry of all parameters of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Dtype> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name: name.into(),
            value,
            grad,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<T> {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| (ParamId(i), p))
    }

    /// Sum of element counts over every registered parameter.
    pub fn total_elements(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = T::zero();
            }
        }
    }

    /// Adds `grad` into the parameter's accumulator.
    pub fn accumulate_grad(&mut self, id: ParamId, grad: &Tensor<T>) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != grad.shape() {
            return Err(AdError::ShapeMismatch {
                context: "gradient accumulation",
                expected: p.value.shape().to_vec(),
                got: grad.shape().to_vec(),
            });
        }
        for (g, d) in p.grad.data_mut().iter_mut().zip(grad.data()) {
            *g = *g + *d;
        }
        Ok(())
    }
}
