//! Small dense-array engine with hand-written forward and backward passes.
//!
//! Only the layer types the RUL network needs are provided: fully connected,
//! 1-D convolution (cross-correlation), 1-D max pooling, stacked LSTM and
//! rank-1 concatenation. Each layer's `forward` returns the output together
//! with a cache; `backward` consumes that cache, accumulates parameter
//! gradients and returns the gradient with respect to the layer input.
//! Everything is `f64`.

mod concat;
mod conv;
mod dense;
mod lstm;
mod optim;
mod pool;

pub use concat::{concat, split_grad};
pub use conv::{Conv1d, Conv1dCache};
pub use dense::{Dense, DenseCache};
pub use lstm::{LstmCellState, LstmLayer, LstmLayerCache, LstmStack, LstmStackCache};
pub use optim::{Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use pool::{MaxPool1d, MaxPoolCache};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Row-major dense array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(EngineError::ShapeMismatch {
                context: "tensor construction".into(),
                expected: shape,
                actual: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Rank-1 tensor owning `data`.
    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Rank-2 tensor from row slices. Panics on ragged rows.
    pub fn matrix(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix rows");
        Self {
            shape: vec![rows.len(), cols],
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same data viewed under a different shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(EngineError::NonFinite(what.to_string()))
        }
    }

    pub(crate) fn expect_shape(&self, context: &str, expected: &[usize]) -> Result<()> {
        if self.shape == expected {
            Ok(())
        } else {
            Err(EngineError::ShapeMismatch {
                context: context.to_string(),
                expected: expected.to_vec(),
                actual: self.shape.clone(),
            })
        }
    }

    pub(crate) fn uniform<R: Rng + ?Sized>(shape: &[usize], limit: f64, rng: &mut R) -> Self {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }
}

/// Elementwise nonlinearity applied at the end of a dense or conv layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub(crate) fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Trainable weights and biases of one layer with gradient accumulators of
/// identical shape. Only an optimizer step changes the values.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    weights: Tensor,
    biases: Tensor,
    weight_grad: Tensor,
    bias_grad: Tensor,
}

impl LayerParams {
    pub fn new(weights: Tensor, biases: Tensor) -> Self {
        let weight_grad = Tensor::zeros(weights.shape());
        let bias_grad = Tensor::zeros(biases.shape());
        Self {
            weights,
            biases,
            weight_grad,
            bias_grad,
        }
    }

    pub fn weights(&self) -> &Tensor {
        &self.weights
    }

    pub fn biases(&self) -> &Tensor {
        &self.biases
    }

    pub fn weight_grad(&self) -> &Tensor {
        &self.weight_grad
    }

    pub fn bias_grad(&self) -> &Tensor {
        &self.bias_grad
    }

    pub fn weights_mut(&mut self) -> &mut Tensor {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut Tensor {
        &mut self.biases
    }

    pub fn zero_grad(&mut self) {
        self.weight_grad.fill(0.0);
        self.bias_grad.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Multiplies both accumulators by `factor`.
    pub fn scale_grad(&mut self, factor: f64) {
        self.weight_grad.data.iter_mut().for_each(|g| *g *= factor);
        self.bias_grad.data.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn grads_finite(&self) -> bool {
        self.weight_grad.data.iter().all(|g| g.is_finite())
            && self.bias_grad.data.iter().all(|g| g.is_finite())
    }

    /// Values followed by the matching gradients, weights first.
    pub(crate) fn slots_mut(&mut self) -> [(&mut [f64], &[f64]); 2] {
        [
            (&mut self.weights.data, &self.weight_grad.data),
            (&mut self.biases.data, &self.bias_grad.data),
        ]
    }

}

/// Glorot-uniform bound used for dense and convolution weights.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rejects_wrong_element_count() {
        let err = Tensor::new(vec![2, 3], vec![0.0; 5]).unwrap_err();
        assert!(matches!(err, EngineError::ShapeMismatch { .. }));
    }

    #[test]
    fn ensure_finite_flags_nan() {
        let t = Tensor::vector(vec![1.0, f64::NAN]);
        assert_eq!(
            t.ensure_finite("probe"),
            Err(EngineError::NonFinite("probe".into()))
        );
    }

    #[test]
    fn grad_shapes_mirror_params() {
        let p = LayerParams::new(Tensor::zeros(&[4, 3]), Tensor::zeros(&[4]));
        assert_eq!(p.weight_grad().shape(), p.weights().shape());
        assert_eq!(p.bias_grad().shape(), p.biases().shape());
        assert_eq!(p.param_count(), 16);
    }
}
