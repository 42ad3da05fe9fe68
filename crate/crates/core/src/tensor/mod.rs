//! Minimal dense f64 arrays with reverse-mode automatic differentiation.
//!
//! [`Tensor`] is a value type: a shape plus row-major data. All model
//! arithmetic goes through a [`Tape`], which records each primitive as it
//! executes and replays the records in reverse to accumulate gradients.
//! The op set is exactly what the policy and losses need — matmul,
//! elementwise arithmetic, row softmax / layer norm / L2 normalization,
//! SiLU (the one smooth activation used throughout), reductions,
//! concat/slice, 2D convolution, and bilinear upsampling.
//!
//! Design notes:
//! - 64-bit reals everywhere; gradient checking at 1e-4 relative error
//!   drives the precision choice.
//! - No broadcasting beyond the documented row ops (`add_row`, `mul_row`).
//! - Tensors are plain values and safe to move across threads; a `Tape`
//!   lives on one thread.

mod check;
mod ops;
mod tape;

pub use check::{finite_diff_check, finite_diff_check_coords};
pub use tape::{Axis, Tape, Var};

use thiserror::Error;

/// Errors from tensor construction and tape operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("backward: output must be a scalar, got shape {got:?}")]
    NonScalarOutput { got: Vec<usize> },
    #[error("backward: tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Dense row-major f64 array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, checking that the shape matches the data length.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::Invalid {
                op: "Tensor::new",
                msg: format!("shape {:?} needs {} values, got {}", shape, numel, data.len()),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..numel).map(&mut f).collect(),
        }
    }

    /// One-hot row vector of length `classes`.
    pub fn one_hot(index: usize, classes: usize) -> Self {
        let mut data = vec![0.0; classes];
        data[index] = 1.0;
        Tensor {
            shape: vec![classes],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "item() on non-scalar");
        self.data[0]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// View as (rows, cols); rank-1 tensors count as a single row.
    pub(crate) fn rows_cols(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape.len() {
            1 => Ok((1, self.shape[0])),
            2 => Ok((self.shape[0], self.shape[1])),
            _ => Err(TensorError::BadShape {
                op,
                expected: "rank 1 or 2",
                got: self.shape.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn one_hot_unit_mass() {
        let t = Tensor::one_hot(2, 5);
        assert_eq!(t.data(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
