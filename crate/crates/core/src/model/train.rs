use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ModelError, Network, TrainedModel, TrainingMeta};
use crate::dataset::{partition_devices, NormalizationStats, NormalizedSample, Sample, SplitDataset};
use crate::tensor::{EngineError, Optimizer, OptimizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Upper bound on passes over the training set; 0 leaves the network at
    /// its initialization.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Share of training devices held out for early stopping.
    pub validation_fraction: f64,
    /// Seeds the validation carve and the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            patience: 50,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TrainError::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(TrainError::Config("patience must be ≥ 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return Err(TrainError::Config(format!(
                "validation_fraction must lie in (0, 0.5), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

/// Losses are mean squared errors in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    /// 1-based.
    pub epoch: usize,
    /// Mean over the epoch's mini-batches, each measured before its update.
    pub train_loss: f64,
    pub val_loss: f64,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: TrainedModel,
    pub history: Vec<EpochLoss>,
    pub stopped_early: bool,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss or gradient in epoch {epoch}; last good parameters retained")]
    NumericalFailure {
        epoch: usize,
        last_good: Box<TrainedModel>,
        history: Vec<EpochLoss>,
    },
}

/// Mean squared error of raw outputs against normalized targets.
pub fn mse(network: &Network, samples: &[NormalizedSample]) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let preds = network.predict_normalized(samples)?;
    let sum: f64 = preds.iter().zip(samples).map(|(y, s)| (y - s.target).powi(2)).sum();
    Ok(sum / samples.len() as f64)
}

/// Trains on already-normalized samples. `val` drives early stopping; pass
/// the training set again when no held-out data exists.
pub fn fit(
    network: Network,
    train: &[NormalizedSample],
    val: &[NormalizedSample],
    stats: &NormalizationStats,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    fit_observed(network, train, val, stats, config, &mut |_| {})
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_observed(
    mut network: Network,
    train: &[NormalizedSample],
    val: &[NormalizedSample],
    stats: &NormalizationStats,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLoss),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let fingerprint = stats.fingerprint();
    if let Some(bad) = train.iter().chain(val).find(|s| s.fingerprint != fingerprint) {
        return Err(ModelError::StatsMismatch {
            expected: fingerprint,
            got: bad.fingerprint,
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history: Vec<EpochLoss> = Vec::new();
    let mut best: Option<(usize, Vec<f64>)> = None;
    let mut best_val = f64::INFINITY;
    let mut stopped_early = false;

    let snapshot = |net: &Network, best: &Option<(usize, Vec<f64>)>, history: &[EpochLoss]| {
        let mut good = net.clone();
        if let Some((_, params)) = best {
            good.load_flat(params).expect("snapshot from same network");
        }
        TrainedModel::new(good, stats.clone(), meta(config, best, history))
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            network.zero_grad();
            let scale = 2.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &train[i];
                let y = match network.forward_train(&s.window, &s.conditions) {
                    Ok(y) => y,
                    Err(ModelError::Engine(EngineError::NonFinite(_))) => {
                        return Err(numerical_failure(epoch, snapshot(&network, &best, &history), history));
                    }
                    Err(e) => return Err(e.into()),
                };
                let diff = y - s.target;
                batch_loss += diff * diff;
                network.backward(scale * diff)?;
            }
            let batch_loss = batch_loss / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(numerical_failure(epoch, snapshot(&network, &best, &history), history));
            }
            match optimizer.step(&mut network.params_mut(), config.learning_rate) {
                Ok(()) => {}
                Err(EngineError::NonFinite(_)) => {
                    return Err(numerical_failure(epoch, snapshot(&network, &best, &history), history));
                }
                Err(e) => return Err(ModelError::from(e).into()),
            }
            loss_sum += batch_loss;
            batches += 1;
        }

        let val_loss = match mse(&network, val) {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(ModelError::Engine(EngineError::NonFinite(_))) => {
                return Err(numerical_failure(epoch, snapshot(&network, &best, &history), history));
            }
            Err(e) => return Err(e.into()),
        };
        if val_loss < best_val {
            best_val = val_loss;
            best = Some((epoch, network.flat_params()));
        }
        let record = EpochLoss {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss,
            best_val_loss: best_val,
        };
        on_epoch(&record);
        history.push(record);

        let best_epoch = best.as_ref().map_or(0, |(e, _)| *e);
        if epoch - best_epoch >= config.patience {
            stopped_early = epoch < config.epochs;
            break;
        }
    }

    let model = snapshot(&network, &best, &history);
    Ok(TrainOutcome {
        model,
        history,
        stopped_early,
    })
}

fn numerical_failure(epoch: usize, last_good: TrainedModel, history: Vec<EpochLoss>) -> TrainError {
    TrainError::NumericalFailure {
        epoch,
        last_good: Box::new(last_good),
        history,
    }
}

fn meta(config: &TrainConfig, best: &Option<(usize, Vec<f64>)>, history: &[EpochLoss]) -> TrainingMeta {
    let best_epoch = best.as_ref().map(|(e, _)| *e);
    let at_best = best_epoch.and_then(|e| history.get(e - 1));
    TrainingMeta {
        epochs_run: history.len(),
        best_epoch,
        final_train_loss: at_best.map(|h| h.train_loss),
        final_val_loss: at_best.map(|h| h.val_loss),
        seed: config.seed,
    }
}

/// Carves a device-level validation set out of `train`. With fewer than two
/// devices there is nothing to hold out and the training set doubles as the
/// validation set.
pub fn carve_validation(train: &[Sample], config: &TrainConfig) -> (Vec<Sample>, Vec<Sample>) {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for s in train {
        match counts.iter_mut().find(|(id, _)| *id == s.device_id) {
            Some((_, n)) => *n += 1,
            None => counts.push((s.device_id.clone(), 1)),
        }
    }
    if counts.len() < 2 {
        return (train.to_vec(), train.to_vec());
    }
    let (keep, _) = partition_devices(&counts, config.seed, 1.0 - config.validation_fraction);
    let (fit_set, val_set): (Vec<Sample>, Vec<Sample>) =
        train.iter().cloned().partition(|s| keep.contains(&s.device_id));
    (fit_set, val_set)
}

/// Trains on a split dataset: validation devices are carved from the train
/// side, and everything is normalized with the split's stored statistics.
pub fn train(network: Network, data: &SplitDataset, config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    train_observed(network, data, config, &mut |_| {})
}

pub fn train_observed(
    network: Network,
    data: &SplitDataset,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochLoss),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if data.train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let (fit_set, val_set) = carve_validation(&data.train, config);
    let fit_norm = data.stats.apply_all(&fit_set);
    let val_norm = data.stats.apply_all(&val_set);
    fit_observed(network, &fit_norm, &val_norm, &data.stats, config, on_epoch)
}
