use serde::{Deserialize, Serialize};

use super::{EngineError, LayerParams, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

/// Gradient-descent optimizer. Adam moment buffers are keyed by the
/// position of each parameter slot, so callers must pass the same layers in
/// the same order on every step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }

    /// Applies one update to every layer using its accumulated gradients.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, layers: &mut [&mut LayerParams], learning_rate: f64) -> Result<()> {
        if let Some(idx) = layers.iter().position(|p| !p.grads_finite()) {
            return Err(EngineError::NonFinite(format!(
                "gradient of parameter group {idx}"
            )));
        }
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for layer in layers.iter_mut() {
                    for (values, grads) in layer.slots_mut() {
                        for (v, g) in values.iter_mut().zip(grads) {
                            *v -= learning_rate * g;
                        }
                    }
                }
            }
            OptimizerKind::Adam => {
                let t = self.step_count as i32;
                let bias1 = 1.0 - ADAM_BETA1.powi(t);
                let bias2 = 1.0 - ADAM_BETA2.powi(t);
                let mut slot = 0;
                for layer in layers.iter_mut() {
                    for (values, grads) in layer.slots_mut() {
                        if self.first_moment.len() <= slot {
                            self.first_moment.push(vec![0.0; values.len()]);
                            self.second_moment.push(vec![0.0; values.len()]);
                        }
                        let m = &mut self.first_moment[slot];
                        let v = &mut self.second_moment[slot];
                        if m.len() != values.len() {
                            return Err(EngineError::Config(format!(
                                "optimizer slot {slot} changed size from {} to {}",
                                m.len(),
                                values.len()
                            )));
                        }
                        for k in 0..values.len() {
                            let g = grads[k];
                            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g;
                            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g * g;
                            let m_hat = m[k] / bias1;
                            let v_hat = v[k] / bias2;
                            values[k] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                        }
                        slot += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_param(w: f64, g: f64) -> LayerParams {
        let mut p = LayerParams::new(Tensor::vector(vec![w]), Tensor::vector(vec![0.0]));
        p.weight_grad.data_mut()[0] = g;
        p
    }

    #[test]
    fn one_sgd_step() {
        let mut p = scalar_param(1.0, 2.0);
        Optimizer::new(OptimizerKind::Sgd).step(&mut [&mut p], 0.1).unwrap();
        assert!((p.weights().data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut p = scalar_param(0.37, 0.0);
            let before = p.clone();
            let mut opt = Optimizer::new(kind);
            for _ in 0..3 {
                opt.step(&mut [&mut p], 0.5).unwrap();
            }
            assert_eq!(p, before, "{kind:?}");
        }
    }

    #[test]
    fn first_adam_step_is_about_learning_rate() {
        // t = 1: m = 0.1, v = 0.001, m̂ = 1, v̂ = 1 → Δw = lr / (1 + ε).
        let mut p = scalar_param(1.0, 1.0);
        Optimizer::new(OptimizerKind::Adam).step(&mut [&mut p], 0.001).unwrap();
        let expected = 1.0 - 0.001 / (1.0 + ADAM_EPSILON);
        assert!((p.weights().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_without_update() {
        let mut good = scalar_param(1.0, 1.0);
        let mut bad = scalar_param(2.0, f64::NAN);
        let mut opt = Optimizer::new(OptimizerKind::Adam);
        let err = opt.step(&mut [&mut good, &mut bad], 0.01).unwrap_err();
        assert!(matches!(err, EngineError::NonFinite(_)));
        assert_eq!(good.weights().data()[0], 1.0);
        assert_eq!(opt.steps_taken(), 0);
    }
}
