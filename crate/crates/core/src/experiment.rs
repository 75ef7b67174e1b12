//! The full benchmark: generate a fleet, build and split the dataset, train
//! a model, and score it next to the least-squares baseline on the same test
//! samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetError, Sample, SplitDataset, DEFAULT_TRAIN_FRACTION, DEFAULT_WINDOW};
use crate::llsf::{llsf_evaluate, LlsfError};
use crate::metrics::{make_report, EvalReport, MetricsError, ScoreParams};
use crate::model::{self, ModelError, ModelSpec, Network, TrainConfig, TrainError, TrainOutcome, TrainedModel};
use crate::synth::{self, DeviceRecord, GeneratorConfig, SynthError};

pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Llsf(#[from] LlsfError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Every knob of the pipeline. [`ExperimentConfig::seeded`] derives all
/// stage seeds from one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub window: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub model: ModelSpec,
    pub training: TrainConfig,
    pub histogram_bins: usize,
    pub score: ScoreParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::seeded(42)
    }
}

impl ExperimentConfig {
    pub fn seeded(seed: u64) -> Self {
        let mut cfg = Self {
            generator: GeneratorConfig::default(),
            window: DEFAULT_WINDOW,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split_seed: 0,
            model: ModelSpec::default(),
            training: TrainConfig::default(),
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            score: ScoreParams::default(),
        };
        cfg.set_seed(seed);
        cfg
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.generator.master_seed = seed;
        self.split_seed = seed;
        self.model.seed = seed;
        self.training.seed = seed;
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub fleet: Vec<DeviceRecord>,
    pub samples: Vec<Sample>,
    pub split: SplitDataset,
    pub training: TrainOutcome,
    pub model_report: EvalReport,
    pub baseline_report: EvalReport,
}

/// Scores a trained model on raw (unnormalized) samples.
pub fn evaluate_model(
    model: &TrainedModel,
    samples: &[Sample],
    histogram_bins: usize,
    score: &ScoreParams,
) -> Result<EvalReport, ExperimentError> {
    let pred = model.predict_samples(samples)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.rul_h).collect();
    Ok(make_report(&truth, &pred, histogram_bins, score)?)
}

/// Fleet through dataset split, shared by [`run`] and callers that want to
/// stop before training.
pub fn prepare(config: &ExperimentConfig) -> Result<(Vec<DeviceRecord>, Vec<Sample>, SplitDataset), ExperimentError> {
    let fleet = synth::generate_fleet(&config.generator)?;
    let samples = dataset::build_samples(&fleet, config.window);
    let split = dataset::split(&samples, config.split_seed, config.train_fraction)?;
    Ok((fleet, samples, split))
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    run_observed(config, &mut |_| {})
}

pub fn run_observed(
    config: &ExperimentConfig,
    on_epoch: &mut dyn FnMut(&model::EpochLoss),
) -> Result<ExperimentResult, ExperimentError> {
    let (fleet, samples, split) = prepare(config)?;
    let spec = ModelSpec {
        window: config.window,
        ..config.model.clone()
    };
    let network = Network::build(&spec)?;
    let training = model::train_observed(network, &split, &config.training, on_epoch)?;
    let model_report = evaluate_model(&training.model, &split.test, config.histogram_bins, &config.score)?;
    let baseline_report = llsf_evaluate(
        &split.test,
        &fleet,
        split.stats.rul_cap_h,
        config.histogram_bins,
        &config.score,
    )?;
    Ok(ExperimentResult {
        fleet,
        samples,
        split,
        training,
        model_report,
        baseline_report,
    })
}
