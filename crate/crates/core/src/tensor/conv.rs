use rand::Rng;

use super::{glorot_limit, Activation, EngineError, LayerParams, Result, Tensor};

/// 1-D convolution over a `[len, ch_in]` sequence with "same" zero padding.
///
/// Computed as cross-correlation (no kernel flip):
/// `out[t, o] = act(b[o] + Σ_c Σ_j w[o, c, j] · x[t + j - k/2, c])`,
/// where out-of-range positions read as zero. Weights are `[ch_out, ch_in, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    params: LayerParams,
    activation: Activation,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    input: Tensor,
    output: Vec<f64>,
}

impl Conv1d {
    pub fn new(params: LayerParams, activation: Activation) -> Result<Self> {
        let w = params.weights().shape();
        if w.len() != 3 {
            return Err(EngineError::Config(format!(
                "conv1d weights must be [ch_out, ch_in, kernel], got {w:?}"
            )));
        }
        if w[2] % 2 == 0 {
            return Err(EngineError::Config(format!(
                "conv1d kernel must be odd for same padding, got {}",
                w[2]
            )));
        }
        params.biases().expect_shape("conv1d bias", &[w[0]])?;
        Ok(Self { params, activation })
    }

    pub fn init<R: Rng + ?Sized>(
        ch_in: usize,
        ch_out: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(EngineError::Config(format!(
                "conv1d kernel must be odd for same padding, got {kernel}"
            )));
        }
        let limit = glorot_limit(ch_in * kernel, ch_out * kernel);
        let weights = Tensor::uniform(&[ch_out, ch_in, kernel], limit, rng);
        Ok(Self {
            params: LayerParams::new(weights, Tensor::zeros(&[ch_out])),
            activation,
        })
    }

    pub fn ch_out(&self) -> usize {
        self.params.weights().shape()[0]
    }

    pub fn ch_in(&self) -> usize {
        self.params.weights().shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.params.weights().shape()[2]
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

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Conv1dCache)> {
        let (ch_out, ch_in, k) = (self.ch_out(), self.ch_in(), self.kernel());
        if input.rank() != 2 || input.shape()[1] != ch_in {
            return Err(EngineError::ShapeMismatch {
                context: "conv1d input [len, ch_in]".into(),
                expected: vec![input.shape().first().copied().unwrap_or(0), ch_in],
                actual: input.shape().to_vec(),
            });
        }
        let len = input.shape()[0];
        let half = (k / 2) as isize;
        let x = input.data();
        let w = self.params.weights().data();
        let b = self.params.biases().data();
        let mut out = vec![0.0; len * ch_out];
        for t in 0..len {
            for o in 0..ch_out {
                let mut z = b[o];
                for j in 0..k {
                    let src = t as isize + j as isize - half;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let src = src as usize;
                    for c in 0..ch_in {
                        z += w[(o * ch_in + c) * k + j] * x[src * ch_in + c];
                    }
                }
                out[t * ch_out + o] = self.activation.apply(z);
            }
        }
        let cache = Conv1dCache {
            input: input.clone(),
            output: out.clone(),
        };
        Ok((Tensor::new(vec![len, ch_out], out)?, cache))
    }

    pub fn backward(&mut self, cache: &Conv1dCache, grad_out: &Tensor) -> Result<Tensor> {
        let (ch_out, ch_in, k) = (self.ch_out(), self.ch_in(), self.kernel());
        let len = cache.input.shape()[0];
        grad_out.expect_shape("conv1d output gradient", &[len, ch_out])?;
        let half = (k / 2) as isize;
        let x = cache.input.data();
        let mut grad_in = vec![0.0; len * ch_in];
        let p = &mut self.params;
        let w = &p.weights.data;
        let wg = &mut p.weight_grad.data;
        let bg = &mut p.bias_grad.data;
        for t in 0..len {
            for o in 0..ch_out {
                let idx = t * ch_out + o;
                let dz = grad_out.data()[idx] * self.activation.derivative_from_output(cache.output[idx]);
                if dz == 0.0 {
                    continue;
                }
                bg[o] += dz;
                for j in 0..k {
                    let src = t as isize + j as isize - half;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let src = src as usize;
                    for c in 0..ch_in {
                        let wi = (o * ch_in + c) * k + j;
                        wg[wi] += dz * x[src * ch_in + c];
                        grad_in[src * ch_in + c] += dz * w[wi];
                    }
                }
            }
        }
        Tensor::new(vec![len, ch_in], grad_in)
    }
}
