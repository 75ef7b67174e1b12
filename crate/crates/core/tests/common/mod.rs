#![allow(dead_code)]

pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vcsel_rul::dataset::{self, NormalizationStats, NormalizedSample, Sample};
use vcsel_rul::synth::{self, GeneratorConfig};
use vcsel_rul::tensor::{LayerParams, Tensor};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), uniform_vec(rng, n, -1.0, 1.0)).unwrap()
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_grad(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `max |a − n| / max(1, |n|)` over paired entries.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Weighted sum `Σ rᵢ·outᵢ`; its gradient with respect to `out` is `r`.
pub fn probe_loss(out: &Tensor, weights: &[f64]) -> f64 {
    out.data().iter().zip(weights).map(|(o, r)| o * r).sum()
}

pub fn flat(p: &LayerParams) -> Vec<f64> {
    [p.weights().data(), p.biases().data()].concat()
}

pub fn flat_grad(p: &LayerParams) -> Vec<f64> {
    [p.weight_grad().data(), p.bias_grad().data()].concat()
}

pub fn set_flat(p: &mut LayerParams, values: &[f64]) {
    let nw = p.weights().len();
    p.weights_mut().data_mut().copy_from_slice(&values[..nw]);
    p.biases_mut().data_mut().copy_from_slice(&values[nw..]);
}

pub fn small_generator(devices: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        device_count: devices,
        master_seed: seed,
        ..GeneratorConfig::default()
    }
}

pub fn samples_from_fleet(devices: usize, seed: u64) -> Vec<Sample> {
    let fleet = synth::generate_fleet(&small_generator(devices, seed)).unwrap();
    dataset::build_samples(&fleet, dataset::DEFAULT_WINDOW)
}

/// Sixteen windows spread evenly over a small generated fleet, normalized
/// with statistics fitted on themselves.
pub fn toy_set() -> (Vec<NormalizedSample>, NormalizationStats) {
    let all = samples_from_fleet(12, 42);
    let step = all.len() / 16;
    let picked: Vec<Sample> = all.iter().step_by(step).take(16).cloned().collect();
    assert_eq!(picked.len(), 16);
    let stats = NormalizationStats::fit(&picked).unwrap();
    (stats.apply_all(&picked), stats)
}
