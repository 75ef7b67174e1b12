use super::{EngineError, Result, Tensor};

/// Non-overlapping 1-D max pooling over `[len, ch]`. Output length is
/// `floor(len / pool)`; trailing positions that do not fill a window are
/// dropped. Ties go to the lowest index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool1d {
    pool: usize,
}

#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    input_shape: Vec<usize>,
    /// Flat input index selected for each output element.
    argmax: Vec<usize>,
}

impl MaxPoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl MaxPool1d {
    pub fn new(pool: usize) -> Result<Self> {
        if pool == 0 {
            return Err(EngineError::Config("max-pool size must be ≥ 1".into()));
        }
        Ok(Self { pool })
    }

    pub fn pool(&self) -> usize {
        self.pool
    }

    pub fn output_len(&self, len: usize) -> usize {
        len / self.pool
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, MaxPoolCache)> {
        if input.rank() != 2 {
            return Err(EngineError::Config(format!(
                "max-pool expects [len, ch], got {:?}",
                input.shape()
            )));
        }
        let (len, ch) = (input.shape()[0], input.shape()[1]);
        if len < self.pool {
            return Err(EngineError::Config(format!(
                "max-pool of size {} needs at least {} positions, got {len}",
                self.pool, self.pool
            )));
        }
        let out_len = len / self.pool;
        let x = input.data();
        let mut out = vec![0.0; out_len * ch];
        let mut argmax = vec![0; out_len * ch];
        for w in 0..out_len {
            for c in 0..ch {
                let mut best = w * self.pool * ch + c;
                for t in w * self.pool + 1..(w + 1) * self.pool {
                    let idx = t * ch + c;
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out[w * ch + c] = x[best];
                argmax[w * ch + c] = best;
            }
        }
        let cache = MaxPoolCache {
            input_shape: input.shape().to_vec(),
            argmax,
        };
        Ok((Tensor::new(vec![out_len, ch], out)?, cache))
    }

    pub fn backward(&self, cache: &MaxPoolCache, grad_out: &Tensor) -> Result<Tensor> {
        let (len, ch) = (cache.input_shape[0], cache.input_shape[1]);
        grad_out.expect_shape("max-pool output gradient", &[len / self.pool, ch])?;
        let mut grad_in = vec![0.0; len * ch];
        for (g, &src) in grad_out.data().iter().zip(&cache.argmax) {
            grad_in[src] += g;
        }
        Tensor::new(cache.input_shape.clone(), grad_in)
    }
}
