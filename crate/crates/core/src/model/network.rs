use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{ModelSpec, ShapePlan, Variant, N_CONDITIONS};
use super::ModelError;
use crate::dataset::NormalizedSample;
use crate::tensor::{
    concat, split_grad, Activation, Conv1d, Conv1dCache, Dense, DenseCache, EngineError, LayerParams,
    LstmStack, LstmStackCache, MaxPool1d, MaxPoolCache, Tensor,
};

/// Everything the backward pass needs from one recorded forward pass.
#[derive(Debug, Clone)]
struct Tape {
    convs: Vec<(Conv1dCache, Option<MaxPoolCache>)>,
    lstm: Option<LstmStackCache>,
    head: DenseCache,
    output: DenseCache,
}

/// Loss gradient with respect to the two input groups.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrad {
    pub window: Vec<f64>,
    pub conditions: Vec<f64>,
}

/// The RUL regressor.
///
/// Hybrid wiring with the default spec:
///
/// ```text
/// conditions [6, 1] → conv32 → pool2 → conv32 → pool2 → conv16 → flatten (16) ─┐
///                                                                               ├→ concat (26) → dense64 relu → dense1
/// window     [3, 1] → lstm40 → lstm20 → lstm10 → last hidden (10) ────────────┘
/// ```
///
/// `forward_train` records a tape that the next `backward` consumes; plain
/// `predict` records nothing and takes `&self`, so a trained network can be
/// shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    plan: ShapePlan,
    convs: Vec<Conv1d>,
    pools: Vec<Option<MaxPool1d>>,
    lstm: Option<LstmStack>,
    head: Dense,
    output: Dense,
    recorded: Option<Box<TapeSlot>>,
}

// Wrapper so `Network` can derive `PartialEq` without comparing tapes.
#[derive(Debug, Clone)]
struct TapeSlot(Tape);

impl PartialEq for TapeSlot {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Network {
    /// Builds and initializes a network from `spec.seed`.
    pub fn build(spec: &ModelSpec) -> Result<Self, ModelError> {
        let plan = spec.shape_plan()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut convs = Vec::new();
        let mut pools = Vec::new();
        if spec.variant.uses_cnn() {
            let mut ch_in = 1;
            for (i, &filters) in spec.conv_filters.iter().enumerate() {
                let conv = Conv1d::init(ch_in, filters, spec.conv_kernel, spec.conv_activation, &mut rng)
                    .map_err(|e| ModelError::config(&format!("conv {}", i + 1), e.to_string()))?;
                convs.push(conv);
                pools.push(if spec.pool_after.contains(&i) {
                    Some(MaxPool1d::new(spec.pool_size)?)
                } else {
                    None
                });
                ch_in = filters;
            }
        }
        let lstm = if spec.variant.uses_lstm() {
            Some(LstmStack::init(1, &spec.lstm_cells, &mut rng)?)
        } else {
            None
        };
        let head = Dense::init(plan.head_input, spec.head_width, spec.head_activation, &mut rng);
        let output = Dense::init(spec.head_width, 1, Activation::Identity, &mut rng);
        Ok(Self {
            spec: spec.clone(),
            plan,
            convs,
            pools,
            lstm,
            head,
            output,
            recorded: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn plan(&self) -> ShapePlan {
        self.plan
    }

    /// Parameter groups in canonical order: conv layers, LSTM layers (bottom
    /// to top), hidden dense, output dense.
    pub fn params(&self) -> Vec<&LayerParams> {
        let mut out: Vec<&LayerParams> = self.convs.iter().map(Conv1d::params).collect();
        if let Some(lstm) = &self.lstm {
            out.extend(lstm.layers().iter().map(|l| l.params()));
        }
        out.push(self.head.params());
        out.push(self.output.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut LayerParams> {
        let mut out: Vec<&mut LayerParams> = self.convs.iter_mut().map(Conv1d::params_mut).collect();
        if let Some(lstm) = &mut self.lstm {
            out.extend(lstm.layers_mut().iter_mut().map(|l| l.params_mut()));
        }
        out.push(self.head.params_mut());
        out.push(self.output.params_mut());
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.param_count()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn check_input(&self, window: &[f64], conditions: &[f64]) -> Result<(), ModelError> {
        if window.len() != self.spec.window {
            return Err(EngineError::ShapeMismatch {
                context: "power window".into(),
                expected: vec![self.spec.window],
                actual: vec![window.len()],
            }
            .into());
        }
        if conditions.len() != N_CONDITIONS {
            return Err(EngineError::ShapeMismatch {
                context: "operating conditions".into(),
                expected: vec![N_CONDITIONS],
                actual: vec![conditions.len()],
            }
            .into());
        }
        Ok(())
    }

    fn run(&self, window: &[f64], conditions: &[f64]) -> Result<(f64, Tape), ModelError> {
        self.check_input(window, conditions)?;
        if self.spec.variant == Variant::Mlp {
            let mut flat = window.to_vec();
            flat.extend_from_slice(conditions);
            return self.finish(Tensor::vector(flat), Vec::new(), None);
        }

        let mut conv_caches = Vec::with_capacity(self.convs.len());
        let mut cnn_out = Tensor::vector(Vec::new());
        if self.spec.variant.uses_cnn() {
            let mut x = Tensor::new(vec![N_CONDITIONS, 1], conditions.to_vec())?;
            for (conv, pool) in self.convs.iter().zip(&self.pools) {
                let (y, conv_cache) = conv.forward(&x)?;
                let (y, pool_cache) = match pool {
                    Some(p) => {
                        let (z, c) = p.forward(&y)?;
                        (z, Some(c))
                    }
                    None => (y, None),
                };
                conv_caches.push((conv_cache, pool_cache));
                x = y;
            }
            let n = x.len();
            cnn_out = x.reshape(&[n])?;
        }

        let mut lstm_out = Tensor::vector(Vec::new());
        let mut lstm_cache = None;
        if let Some(stack) = &self.lstm {
            let seq = Tensor::new(vec![window.len(), 1], window.to_vec())?;
            let (h, cache) = stack.forward(&seq)?;
            lstm_out = h;
            lstm_cache = Some(cache);
        }
        self.finish(concat(&cnn_out, &lstm_out)?, conv_caches, lstm_cache)
    }

    fn finish(
        &self,
        fused: Tensor,
        convs: Vec<(Conv1dCache, Option<MaxPoolCache>)>,
        lstm: Option<LstmStackCache>,
    ) -> Result<(f64, Tape), ModelError> {
        let (hidden, head) = self.head.forward(&fused)?;
        let (out, output) = self.output.forward(&hidden)?;
        let y = out.data()[0];
        if !y.is_finite() {
            return Err(EngineError::NonFinite("network output".into()).into());
        }
        Ok((
            y,
            Tape {
                convs,
                lstm,
                head,
                output,
            },
        ))
    }

    /// Raw network output (normalized RUL) for one sample.
    pub fn predict_one(&self, window: &[f64], conditions: &[f64]) -> Result<f64, ModelError> {
        self.run(window, conditions).map(|(y, _)| y)
    }

    pub fn predict_normalized(&self, samples: &[NormalizedSample]) -> Result<Vec<f64>, ModelError> {
        samples
            .iter()
            .map(|s| self.predict_one(&s.window, &s.conditions))
            .collect()
    }

    /// Forward pass that records a tape for the next [`Network::backward`].
    pub fn forward_train(&mut self, window: &[f64], conditions: &[f64]) -> Result<f64, ModelError> {
        let (y, tape) = self.run(window, conditions)?;
        self.recorded = Some(Box::new(TapeSlot(tape)));
        Ok(y)
    }

    /// Accumulates `loss_grad · ∂output/∂param` into every parameter's
    /// gradient and returns the gradient with respect to the inputs.
    /// Consumes the tape recorded by the last `forward_train`.
    pub fn backward(&mut self, loss_grad: f64) -> Result<InputGrad, ModelError> {
        let TapeSlot(tape) = *self.recorded.take().ok_or(EngineError::BackwardWithoutForward)?;
        let g_hidden = self.output.backward(&tape.output, &Tensor::vector(vec![loss_grad]))?;
        let g_fused = self.head.backward(&tape.head, &g_hidden)?;

        if self.spec.variant == Variant::Mlp {
            let (gw, gc) = split_grad(&g_fused, self.spec.window)?;
            return Ok(InputGrad {
                window: gw.into_data(),
                conditions: gc.into_data(),
            });
        }

        let (g_cnn, g_lstm) = split_grad(&g_fused, self.plan.cnn_width)?;
        let mut conditions = vec![0.0; N_CONDITIONS];
        if self.spec.variant.uses_cnn() {
            let channels = *self.spec.conv_filters.last().expect("cnn has layers");
            let mut g = g_cnn.reshape(&[self.plan.cnn_length, channels])?;
            for ((conv, pool), (conv_cache, pool_cache)) in self
                .convs
                .iter_mut()
                .zip(&self.pools)
                .zip(&tape.convs)
                .rev()
            {
                if let (Some(p), Some(pc)) = (pool, pool_cache) {
                    g = p.backward(pc, &g)?;
                }
                g = conv.backward(conv_cache, &g)?;
            }
            conditions = g.into_data();
        }
        let mut window = vec![0.0; self.spec.window];
        if let (Some(stack), Some(cache)) = (&mut self.lstm, &tape.lstm) {
            window = stack.backward(cache, &g_lstm)?.into_data();
        }
        Ok(InputGrad { window, conditions })
    }

    /// Copies parameter values (not gradients) from a flat slice laid out in
    /// canonical order, weights before biases within each group.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<(), ModelError> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(ModelError::ParamCount {
                expected,
                found: values.len(),
            });
        }
        let mut offset = 0;
        for p in self.params_mut() {
            let w = p.weights_mut().data_mut();
            let n = w.len();
            w.copy_from_slice(&values[offset..offset + n]);
            offset += n;
            let b = p.biases_mut().data_mut();
            let n = b.len();
            b.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in self.params() {
            out.extend_from_slice(p.weights().data());
            out.extend_from_slice(p.biases().data());
        }
        out
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for p in self.params() {
            out.extend_from_slice(p.weight_grad().data());
            out.extend_from_slice(p.bias_grad().data());
        }
        out
    }
}
