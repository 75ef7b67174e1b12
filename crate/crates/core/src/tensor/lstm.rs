use rand::Rng;

use super::{EngineError, LayerParams, Result, Tensor};

/// Hidden and cell vectors carried between LSTM steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState {
    pub hidden: Tensor,
    pub cell: Tensor,
}

impl LstmCellState {
    pub fn zeros(cells: usize) -> Self {
        Self {
            hidden: Tensor::zeros(&[cells]),
            cell: Tensor::zeros(&[cells]),
        }
    }
}

/// One LSTM layer with fused weights `[4h, n_in + h]` acting on `[x; h_prev]`
/// and bias `[4h]`. Gate blocks are ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    params: LayerParams,
    n_in: usize,
    cells: usize,
}

#[derive(Debug, Clone)]
struct StepCache {
    /// `[x_t; h_{t-1}]`
    joined: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-nonlinearity gate values, `4h` long, same block order as weights.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmLayerCache {
    steps: Vec<StepCache>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmLayer {
    pub fn new(params: LayerParams, n_in: usize) -> Result<Self> {
        let w = params.weights().shape().to_vec();
        if w.len() != 2 || w[0] % 4 != 0 || w[0] == 0 {
            return Err(EngineError::Config(format!(
                "lstm weights must be [4h, n_in + h], got {w:?}"
            )));
        }
        let cells = w[0] / 4;
        if w[1] != n_in + cells {
            return Err(EngineError::ShapeMismatch {
                context: "lstm fused weights".into(),
                expected: vec![4 * cells, n_in + cells],
                actual: w,
            });
        }
        params.biases().expect_shape("lstm bias", &[4 * cells])?;
        Ok(Self {
            params,
            n_in,
            cells,
        })
    }

    /// Input weights uniform in ±sqrt(6 / (n_in + h)), recurrent weights
    /// uniform in ±1/sqrt(h), forget-gate bias 1, other biases 0.
    pub fn init<R: Rng + ?Sized>(n_in: usize, cells: usize, rng: &mut R) -> Self {
        let cols = n_in + cells;
        let input_limit = (6.0 / (n_in + cells) as f64).sqrt();
        let recurrent_limit = 1.0 / (cells as f64).sqrt();
        let mut w = Vec::with_capacity(4 * cells * cols);
        for _ in 0..4 * cells {
            for c in 0..cols {
                let limit = if c < n_in { input_limit } else { recurrent_limit };
                w.push(rng.random_range(-limit..=limit));
            }
        }
        let mut b = vec![0.0; 4 * cells];
        b[cells..2 * cells].iter_mut().for_each(|v| *v = 1.0);
        Self {
            params: LayerParams::new(
                Tensor::new(vec![4 * cells, cols], w).expect("sized above"),
                Tensor::vector(b),
            ),
            n_in,
            cells,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn params(&self) -> &LayerParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut LayerParams {
        &mut self.params
    }

    fn step_raw(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
        let h = self.cells;
        let cols = self.n_in + h;
        let mut joined = Vec::with_capacity(cols);
        joined.extend_from_slice(x);
        joined.extend_from_slice(h_prev);
        let w = self.params.weights().data();
        let b = self.params.biases().data();
        let mut gates = Vec::with_capacity(4 * h);
        for r in 0..4 * h {
            let row = &w[r * cols..(r + 1) * cols];
            let z = b[r] + row.iter().zip(&joined).map(|(a, v)| a * v).sum::<f64>();
            gates.push(if r / h == 2 { z.tanh() } else { sigmoid(z) });
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            c[k] = f * c_prev[k] + i * g;
            tanh_c[k] = c[k].tanh();
            hidden[k] = o * tanh_c[k];
        }
        let cache = StepCache {
            joined,
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        (hidden, c, cache)
    }

    /// Advances the cell by one input vector.
    pub fn step(&self, x: &Tensor, state: &LstmCellState) -> Result<LstmCellState> {
        x.expect_shape("lstm step input", &[self.n_in])?;
        state.hidden.expect_shape("lstm hidden state", &[self.cells])?;
        state.cell.expect_shape("lstm cell state", &[self.cells])?;
        let (hidden, cell, _) = self.step_raw(x.data(), state.hidden.data(), state.cell.data());
        Ok(LstmCellState {
            hidden: Tensor::vector(hidden),
            cell: Tensor::vector(cell),
        })
    }

    /// Runs the layer over `[steps, n_in]` from a zero state and returns the
    /// hidden state at every step as `[steps, h]`.
    pub fn forward_sequence(&self, seq: &Tensor) -> Result<(Tensor, LstmLayerCache)> {
        if seq.rank() != 2 || seq.shape()[1] != self.n_in {
            return Err(EngineError::ShapeMismatch {
                context: "lstm input [steps, features]".into(),
                expected: vec![seq.shape().first().copied().unwrap_or(0), self.n_in],
                actual: seq.shape().to_vec(),
            });
        }
        let steps = seq.shape()[0];
        if steps == 0 {
            return Err(EngineError::Input("lstm sequence is empty".into()));
        }
        let h = self.cells;
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut out = Vec::with_capacity(steps * h);
        let mut caches = Vec::with_capacity(steps);
        for t in 0..steps {
            let x = &seq.data()[t * self.n_in..(t + 1) * self.n_in];
            let (hidden, c, cache) = self.step_raw(x, &h_prev, &c_prev);
            out.extend_from_slice(&hidden);
            caches.push(cache);
            h_prev = hidden;
            c_prev = c;
        }
        Ok((
            Tensor::new(vec![steps, h], out)?,
            LstmLayerCache { steps: caches },
        ))
    }

    /// Backpropagation through time. `grad_hidden` is `[steps, h]`, the loss
    /// gradient w.r.t. each emitted hidden state; returns `[steps, n_in]`.
    pub fn backward_sequence(&mut self, cache: &LstmLayerCache, grad_hidden: &Tensor) -> Result<Tensor> {
        let steps = cache.steps.len();
        let h = self.cells;
        let n_in = self.n_in;
        let cols = n_in + h;
        grad_hidden.expect_shape("lstm hidden gradient", &[steps, h])?;
        let mut grad_in = vec![0.0; steps * n_in];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let mut djoined = vec![0.0; cols];
        let p = &mut self.params;
        let w = &p.weights.data;
        let wg = &mut p.weight_grad.data;
        let bg = &mut p.bias_grad.data;
        for t in (0..steps).rev() {
            let sc = &cache.steps[t];
            let g = &sc.gates;
            for k in 0..h {
                let (i, f, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let dh = grad_hidden.data()[t * h + k] + dh_next[k];
                let tc = sc.tanh_c[k];
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[k] = dc * cand * i * (1.0 - i);
                dz[h + k] = dc * sc.c_prev[k] * f * (1.0 - f);
                dz[2 * h + k] = dc * i * (1.0 - cand * cand);
                dz[3 * h + k] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            djoined.iter_mut().for_each(|v| *v = 0.0);
            for (r, &d) in dz.iter().enumerate() {
                bg[r] += d;
                if d == 0.0 {
                    continue;
                }
                let row = r * cols;
                for c in 0..cols {
                    wg[row + c] += d * sc.joined[c];
                    djoined[c] += d * w[row + c];
                }
            }
            grad_in[t * n_in..(t + 1) * n_in].copy_from_slice(&djoined[..n_in]);
            dh_next.copy_from_slice(&djoined[n_in..]);
        }
        Tensor::new(vec![steps, n_in], grad_in)
    }
}

/// Stacked LSTM layers; each layer consumes the full hidden sequence of the
/// one below. The stack output is the last layer's final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    layers: Vec<LstmLayer>,
}

#[derive(Debug, Clone)]
pub struct LstmStackCache {
    layers: Vec<LstmLayerCache>,
    steps: usize,
}

impl LstmStack {
    pub fn new(layers: Vec<LstmLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(EngineError::Config("lstm stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[1].n_in() != pair[0].cells() {
                return Err(EngineError::ShapeMismatch {
                    context: "lstm stack layer chaining".into(),
                    expected: vec![pair[0].cells()],
                    actual: vec![pair[1].n_in()],
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn init<R: Rng + ?Sized>(n_features: usize, cells: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(cells.len());
        let mut n_in = n_features;
        for &c in cells {
            if c == 0 {
                return Err(EngineError::Config("lstm layer with zero cells".into()));
            }
            layers.push(LstmLayer::init(n_in, c, rng));
            n_in = c;
        }
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LstmLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LstmLayer] {
        &mut self.layers
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, LstmLayer::cells)
    }

    pub fn forward(&self, seq: &Tensor) -> Result<(Tensor, LstmStackCache)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut current = seq.clone();
        for layer in &self.layers {
            let (out, cache) = layer.forward_sequence(&current)?;
            caches.push(cache);
            current = out;
        }
        let steps = current.shape()[0];
        let h = self.output_size();
        let last = current.data()[(steps - 1) * h..].to_vec();
        Ok((
            Tensor::vector(last),
            LstmStackCache {
                layers: caches,
                steps,
            },
        ))
    }

    pub fn backward(&mut self, cache: &LstmStackCache, grad_out: &Tensor) -> Result<Tensor> {
        let h = self.output_size();
        grad_out.expect_shape("lstm stack output gradient", &[h])?;
        let mut grad = vec![0.0; cache.steps * h];
        grad[(cache.steps - 1) * h..].copy_from_slice(grad_out.data());
        let mut grad = Tensor::new(vec![cache.steps, h], grad)?;
        for (layer, layer_cache) in self.layers.iter_mut().zip(&cache.layers).rev() {
            grad = layer.backward_sequence(layer_cache, &grad)?;
        }
        Ok(grad)
    }
}
