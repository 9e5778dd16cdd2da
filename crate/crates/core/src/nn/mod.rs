//! Minimal tensor engine with reverse-mode differentiation.
//!
//! Only the primitives needed by the adapter, the frozen backbone and the
//! flow-matching loss are provided. Everything is 2-D `T × C` row-major.

mod gradcheck;
mod scalar;
mod tape;
mod tensor;

pub use gradcheck::{compare_gradients, grad_check, numeric_gradient, GradCheck};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: {axis} is {got}, expected {expected}")]
    Dimension {
        op: &'static str,
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    Rank {
        op: &'static str,
        expected: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: shapes {left:?} and {right:?} differ")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not hold {len} values")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("kernel size {size} must be odd")]
    EvenKernel { size: usize },
    #[error("index {index} out of range for {bound} rows")]
    IndexOutOfRange { index: usize, bound: usize },
    #[error("expected a scalar, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("non-finite value while probing coordinate {coordinate}")]
    NonFinite { coordinate: usize },
}

/// A named tensor owned by a model. Frozen parameters are never handed to an
/// optimizer.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<S = f32> {
    pub name: String,
    pub tensor: Tensor<S>,
    pub trainable: bool,
}

impl<S: Scalar> Parameter<S> {
    pub fn new(name: impl Into<String>, tensor: Tensor<S>, trainable: bool) -> Self {
        Self {
            name: name.into(),
            tensor,
            trainable,
        }
    }

    /// Registers the tensor on `tape`, tracking gradients only if trainable.
    pub fn bind(&self, tape: &mut Tape<S>) -> Var {
        tape.leaf(self.tensor.clone(), self.trainable)
    }

    pub fn cast<T: Scalar>(&self) -> Parameter<T> {
        Parameter {
            name: self.name.clone(),
            tensor: self.tensor.cast(),
            trainable: self.trainable,
        }
    }
}
