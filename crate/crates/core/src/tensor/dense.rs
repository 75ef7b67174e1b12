use rand::Rng;

use super::{glorot_limit, Activation, EngineError, LayerParams, Result, Tensor};

/// Fully connected layer, `out = activation(W·x + b)` with `W` of shape
/// `[n_out, n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    params: LayerParams,
    activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Vec<f64>,
    output: Vec<f64>,
}

impl Dense {
    pub fn new(params: LayerParams, activation: Activation) -> Result<Self> {
        let w = params.weights().shape();
        if w.len() != 2 {
            return Err(EngineError::Config(format!(
                "dense weights must be rank 2, got shape {w:?}"
            )));
        }
        params.biases().expect_shape("dense bias", &[w[0]])?;
        Ok(Self { params, activation })
    }

    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = glorot_limit(n_in, n_out);
        let weights = Tensor::uniform(&[n_out, n_in], limit, rng);
        Self {
            params: LayerParams::new(weights, Tensor::zeros(&[n_out])),
            activation,
        }
    }

    pub fn n_in(&self) -> usize {
        self.params.weights().shape()[1]
    }

    pub fn n_out(&self) -> usize {
        self.params.weights().shape()[0]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &LayerParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut LayerParams {
        &mut self.params
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        let (n_out, n_in) = (self.n_out(), self.n_in());
        if input.rank() != 1 || input.len() != n_in {
            return Err(EngineError::ShapeMismatch {
                context: format!("dense input (weights {n_out}x{n_in})"),
                expected: vec![n_in],
                actual: input.shape().to_vec(),
            });
        }
        let w = self.params.weights().data();
        let b = self.params.biases().data();
        let x = input.data();
        let output: Vec<f64> = (0..n_out)
            .map(|r| {
                let row = &w[r * n_in..(r + 1) * n_in];
                let z = b[r] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
                self.activation.apply(z)
            })
            .collect();
        let cache = DenseCache {
            input: x.to_vec(),
            output: output.clone(),
        };
        Ok((Tensor::vector(output), cache))
    }

    pub fn backward(&mut self, cache: &DenseCache, grad_out: &Tensor) -> Result<Tensor> {
        let (n_out, n_in) = (self.n_out(), self.n_in());
        grad_out.expect_shape("dense output gradient", &[n_out])?;
        let dz: Vec<f64> = grad_out
            .data()
            .iter()
            .zip(&cache.output)
            .map(|(g, &y)| g * self.activation.derivative_from_output(y))
            .collect();
        let mut grad_in = vec![0.0; n_in];
        let p = &mut self.params;
        let w = &p.weights.data;
        let wg = &mut p.weight_grad.data;
        let bg = &mut p.bias_grad.data;
        for (r, &d) in dz.iter().enumerate() {
            bg[r] += d;
            if d == 0.0 {
                continue;
            }
            let row = r * n_in;
            for c in 0..n_in {
                wg[row + c] += d * cache.input[c];
                grad_in[c] += d * w[row + c];
            }
        }
        Ok(Tensor::vector(grad_in))
    }
}
