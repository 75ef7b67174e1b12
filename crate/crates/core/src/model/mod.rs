//! The hybrid CNN+LSTM regressor, its ablations, training and checkpoints.

mod checkpoint;
mod network;
mod spec;
mod train;

pub use checkpoint::{CheckpointError, CHECKPOINT_FORMAT_VERSION};
pub use network::{InputGrad, Network};
pub use spec::{ModelSpec, ShapePlan, Variant, N_CONDITIONS};
pub use train::{
    carve_validation, fit, fit_observed, mse, train, train_observed, EpochLoss, TrainConfig, TrainError, TrainOutcome,
};

use thiserror::Error;

use crate::dataset::{NormalizationStats, NormalizedSample, Sample, StatsFingerprint};
use crate::tensor::EngineError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model configuration at stage `{stage}`: {message}")]
    Config { stage: String, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("samples were normalized with stats {got}, but the model was trained with {expected}")]
    StatsMismatch {
        expected: StatsFingerprint,
        got: StatsFingerprint,
    },
    #[error("expected {expected} parameter values, found {found}")]
    ParamCount { expected: usize, found: usize },
}

impl ModelError {
    pub(crate) fn config(stage: &str, message: impl Into<String>) -> Self {
        ModelError::Config {
            stage: stage.to_string(),
            message: message.into(),
        }
    }
}

/// Bookkeeping stored alongside trained weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub final_train_loss: Option<f64>,
    pub final_val_loss: Option<f64>,
    pub seed: u64,
}

/// A network bundled with the normalization it expects. Immutable once
/// built; prediction takes `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    network: Network,
    stats: NormalizationStats,
    fingerprint: StatsFingerprint,
    meta: TrainingMeta,
}

impl TrainedModel {
    pub fn new(network: Network, stats: NormalizationStats, meta: TrainingMeta) -> Self {
        let fingerprint = stats.fingerprint();
        Self {
            network,
            stats,
            fingerprint,
            meta,
        }
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn into_network(self) -> Network {
        self.network
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn fingerprint(&self) -> StatsFingerprint {
        self.fingerprint
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Converts a raw network output to hours, clamped at 0.
    pub fn to_hours(&self, raw: f64) -> f64 {
        (raw * self.stats.rul_cap_h).max(0.0)
    }

    /// RUL in hours for samples normalized with this model's statistics.
    pub fn predict_rul(&self, samples: &[NormalizedSample]) -> Result<Vec<f64>, ModelError> {
        if let Some(bad) = samples.iter().find(|s| s.fingerprint != self.fingerprint) {
            return Err(ModelError::StatsMismatch {
                expected: self.fingerprint,
                got: bad.fingerprint,
            });
        }
        Ok(self
            .network
            .predict_normalized(samples)?
            .into_iter()
            .map(|raw| self.to_hours(raw))
            .collect())
    }

    /// Normalizes raw samples with the model's own statistics, then predicts.
    pub fn predict_samples(&self, samples: &[Sample]) -> Result<Vec<f64>, ModelError> {
        self.predict_rul(&self.stats.apply_all(samples))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats() -> NormalizationStats {
        NormalizationStats::fit(&[Sample {
            device_id: "a".into(),
            window_power: vec![2.0, 1.9, 1.8],
            window_end_time_h: 100.0,
            conditions: [6.0, 140.0, 11.0, 125.0, 38.9, 50.0],
            rul_h: 1000.0,
        }])
        .unwrap()
    }

    fn model() -> TrainedModel {
        let net = Network::build(&ModelSpec {
            conv_filters: vec![2, 2, 2],
            lstm_cells: vec![2, 2, 2],
            head_width: 3,
            ..ModelSpec::default()
        })
        .unwrap();
        TrainedModel::new(net, stats(), TrainingMeta::default())
    }

    #[test]
    fn raw_output_denormalizes_and_clamps() {
        let m = model();
        assert_eq!(m.to_hours(0.5), 2500.0);
        assert_eq!(m.to_hours(-0.02), 0.0);
    }

    #[test]
    fn foreign_stats_are_rejected() {
        let m = model();
        let mut other = stats();
        other.power.min -= 1.0;
        let sample = Sample {
            device_id: "x".into(),
            window_power: vec![1.0, 1.0, 1.0],
            window_end_time_h: 0.0,
            conditions: [0.0; 6],
            rul_h: 0.0,
        };
        let err = m.predict_rul(&[other.apply(&sample)]).unwrap_err();
        assert!(matches!(err, ModelError::StatsMismatch { .. }));
        assert_eq!(m.predict_rul(&[stats().apply(&sample)]).unwrap().len(), 1);
    }

    #[test]
    fn batch_predictions_keep_input_order() {
        let m = model();
        let samples: Vec<Sample> = (0..5)
            .map(|k| Sample {
                device_id: "x".into(),
                window_power: vec![2.0 - 0.1 * k as f64; 3],
                window_end_time_h: 0.0,
                conditions: [6.0, 140.0 + k as f64, 11.0, 125.0, 38.9, 50.0],
                rul_h: 0.0,
            })
            .collect();
        let batch = m.predict_samples(&samples).unwrap();
        let single: Vec<f64> = samples
            .iter()
            .map(|s| m.predict_samples(std::slice::from_ref(s)).unwrap()[0])
            .collect();
        assert_eq!(batch, single);
    }

    #[test]
    fn trained_model_is_shareable() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<TrainedModel>();
    }
}
