//! Dense row-major tensors over f32 or f64 elements.

use crate::error::{AdError, Result};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt;
use std::iter::Sum;

/// Element type of the engine: 32-bit floats for training runs, 64-bit for
/// gradient checks.
pub trait Dtype:
    Float + FromPrimitive + ToPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    fn cast(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite literal")
    }

    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("float widens to f64")
    }
}

impl Dtype for f32 {}
impl Dtype for f64 {}

/// N-dimensional array, row-major, rank ≤ 4 in practice (NCHW activations).
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Dtype> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![v; shape.iter().product()],
        }
    }

    /// Rank-0 tensor holding one value.
    pub fn scalar(v: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![v],
        }
    }

    /// Takes ownership of `data`; its length must equal the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length does not match shape {shape:?}"
        );
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn scalar_value(&self) -> T {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The four dimensions of a rank-4 tensor.
    pub fn dims4(&self, context: &'static str) -> Result<[usize; 4]> {
        match self.shape.as_slice() {
            &[a, b, c, d] => Ok([a, b, c, d]),
            _ => Err(AdError::ShapeMismatch {
                context,
                expected: vec![4],
                got: self.shape.clone(),
            }),
        }
    }

    pub fn dims2(&self, context: &'static str) -> Result<[usize; 2]> {
        match self.shape.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err(AdError::ShapeMismatch {
                context,
                expected: vec![2],
                got: self.shape.clone(),
            }),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 8 {
            write!(f, " {:?}", self.data)
        } else {
            write!(f, " [{} elements]", self.data.len())
        }
    }
}
