//! Supervised samples from device traces.
//!
//! Pipeline: drop censored and infant-mortality devices, cut each remaining
//! trace into stride-1 windows of consecutive power readings taken before the
//! failure time, label each window with `t_f - t_end`, drop labels above the
//! 5,000 h horizon, then split by device and fit min-max scaling on the
//! training side only.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::synth::{DeviceRecord, INFANT_MORTALITY_HOURS};

pub const DEFAULT_WINDOW: usize = 3;
/// Longest RUL kept as a label; also the fixed denominator for label scaling.
pub const RUL_CAP_H: f64 = 5000.0;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const CONDITION_NAMES: [&str; 6] = ["oa_um", "tj_c", "i_ma", "t_c", "j_ka_cm2", "r_ohm"];

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const SPLIT_FILE: &str = "split.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
}

/// One labelled window. Values are raw (not normalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub device_id: String,
    #[serde(rename = "window")]
    pub window_power: Vec<f64>,
    #[serde(rename = "t_end_h")]
    pub window_end_time_h: f64,
    /// `[OA, Tj, I, T, J, R]`
    pub conditions: [f64; 6],
    pub rul_h: f64,
}

/// Keeps devices that failed at or after 100 h. Censored devices have no
/// failure time and therefore no label; they are dropped too.
pub fn filter_devices(fleet: &[DeviceRecord]) -> Vec<DeviceRecord> {
    fleet
        .iter()
        .filter(|d| matches!(d.failure_time_h, Some(t) if t >= INFANT_MORTALITY_HOURS))
        .cloned()
        .collect()
}

/// Stride-1 windows over the measurements taken strictly before `t_f`.
/// Returns nothing for censored devices or short traces.
pub fn window_series(record: &DeviceRecord, window: usize) -> Vec<Sample> {
    let Some(t_f) = record.failure_time_h else {
        return Vec::new();
    };
    if window == 0 {
        return Vec::new();
    }
    let usable = record.times_h.partition_point(|&t| t < t_f);
    if usable < window {
        return Vec::new();
    }
    let conditions = record.conditions.as_array();
    (0..=usable - window)
        .filter_map(|start| {
            let end = start + window - 1;
            let t_end = record.times_h[end];
            let rul_h = t_f - t_end;
            (rul_h <= RUL_CAP_H).then(|| Sample {
                device_id: record.device_id.clone(),
                window_power: record.power_mw[start..=end].to_vec(),
                window_end_time_h: t_end,
                conditions,
                rul_h,
            })
        })
        .collect()
}

/// [`filter_devices`] followed by [`window_series`] on every survivor.
pub fn build_samples(fleet: &[DeviceRecord], window: usize) -> Vec<Sample> {
    filter_devices(fleet)
        .iter()
        .flat_map(|d| window_series(d, window))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl FeatureRange {
    fn over(values: impl Iterator<Item = f64>) -> Self {
        let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        Self { min, max }
    }

    /// Min-max scaling; a constant feature maps to 0. Not clipped.
    pub fn scale(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }
}

/// Short hash identifying a set of normalization statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StatsFingerprint(pub u64);

impl fmt::Display for StatsFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub conditions: [FeatureRange; 6],
    /// Shared by every position of the power window.
    pub power: FeatureRange,
    pub rul_cap_h: f64,
}

impl NormalizationStats {
    pub fn fit(train: &[Sample]) -> Result<Self, DatasetError> {
        if train.is_empty() {
            return Err(DatasetError::Usage(
                "cannot fit normalization on an empty training set".into(),
            ));
        }
        let conditions = std::array::from_fn(|k| FeatureRange::over(train.iter().map(|s| s.conditions[k])));
        let power = FeatureRange::over(train.iter().flat_map(|s| s.window_power.iter().copied()));
        Ok(Self {
            conditions,
            power,
            rul_cap_h: RUL_CAP_H,
        })
    }

    pub fn fingerprint(&self) -> StatsFingerprint {
        let json = serde_json::to_string(self).expect("stats serialize");
        let digest = Sha256::digest(json.as_bytes());
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        StatsFingerprint(u64::from_be_bytes(head))
    }

    pub fn apply(&self, sample: &Sample) -> NormalizedSample {
        self.scale_with(sample, self.fingerprint())
    }

    pub fn apply_all(&self, samples: &[Sample]) -> Vec<NormalizedSample> {
        let fingerprint = self.fingerprint();
        samples.iter().map(|s| self.scale_with(s, fingerprint)).collect()
    }

    fn scale_with(&self, sample: &Sample, fingerprint: StatsFingerprint) -> NormalizedSample {
        NormalizedSample {
            window: sample.window_power.iter().map(|&p| self.power.scale(p)).collect(),
            conditions: std::array::from_fn(|k| self.conditions[k].scale(sample.conditions[k])),
            target: sample.rul_h / self.rul_cap_h,
            fingerprint,
        }
    }
}

/// Model-ready sample, tagged with the statistics it was scaled by.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSample {
    pub window: Vec<f64>,
    pub conditions: [f64; 6],
    /// `rul_h / rul_cap_h`
    pub target: f64,
    pub fingerprint: StatsFingerprint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub stats: NormalizationStats,
    pub split_seed: u64,
    pub train_devices: Vec<String>,
    pub test_devices: Vec<String>,
}

impl SplitDataset {
    pub fn train_fraction(&self) -> f64 {
        self.train.len() as f64 / (self.train.len() + self.test.len()) as f64
    }
}

/// Sample count per device, keyed in sorted device order.
fn device_counts(samples: &[Sample]) -> BTreeMap<&str, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.device_id.as_str()).or_insert(0) += 1;
    }
    counts
}

/// Seeded device-level partition. Devices are shuffled, then assigned to the
/// first group greedily whenever that moves its sample count closer to
/// `fraction` of the total. Both groups are non-empty when `counts` has at
/// least two entries.
pub fn partition_devices(counts: &[(String, usize)], seed: u64, fraction: f64) -> (Vec<String>, Vec<String>) {
    let mut order: Vec<&(String, usize)> = counts.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total: usize = counts.iter().map(|(_, n)| n).sum();
    let target = fraction * total as f64;
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut taken = 0usize;
    for (id, n) in order {
        let with = (taken + n) as f64 - target;
        let without = taken as f64 - target;
        if with.abs() < without.abs() {
            taken += n;
            first.push(id.clone());
        } else {
            second.push(id.clone());
        }
    }
    if second.is_empty() && first.len() > 1 {
        second.push(first.pop().expect("non-empty"));
    }
    if first.is_empty() && second.len() > 1 {
        first.push(second.remove(0));
    }
    (first, second)
}

/// Splits at device granularity and fits normalization on the train side.
pub fn split(samples: &[Sample], seed: u64, train_fraction: f64) -> Result<SplitDataset, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Usage(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let counts: Vec<(String, usize)> = device_counts(samples)
        .into_iter()
        .map(|(id, n)| (id.to_string(), n))
        .collect();
    if counts.len() < 2 {
        return Err(DatasetError::Usage(format!(
            "splitting needs at least 2 devices with samples, got {}",
            counts.len()
        )));
    }
    let (train_devices, test_devices) = partition_devices(&counts, seed, train_fraction);
    assemble(samples, train_devices, test_devices, seed, None)
}

fn assemble(
    samples: &[Sample],
    train_devices: Vec<String>,
    test_devices: Vec<String>,
    seed: u64,
    stats: Option<NormalizationStats>,
) -> Result<SplitDataset, DatasetError> {
    let train_set: HashSet<&str> = train_devices.iter().map(String::as_str).collect();
    let test_set: HashSet<&str> = test_devices.iter().map(String::as_str).collect();
    if let Some(both) = train_set.intersection(&test_set).next() {
        return Err(DatasetError::Usage(format!("device {both} is in both splits")));
    }
    let train: Vec<Sample> = samples
        .iter()
        .filter(|s| train_set.contains(s.device_id.as_str()))
        .cloned()
        .collect();
    let test: Vec<Sample> = samples
        .iter()
        .filter(|s| test_set.contains(s.device_id.as_str()))
        .cloned()
        .collect();
    let stats = match stats {
        Some(s) => s,
        None => NormalizationStats::fit(&train)?,
    };
    Ok(SplitDataset {
        train,
        test,
        stats,
        split_seed: seed,
        train_devices,
        test_devices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplitFile {
    seed: u64,
    train_devices: Vec<String>,
    test_devices: Vec<String>,
}

/// Writes `dataset.jsonl` (every sample, in input order), `stats.json` and
/// `split.json` into `dir`.
pub fn write_dataset(dir: &Path, samples: &[Sample], split: &SplitDataset) -> Result<(), DatasetError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut lines = String::new();
    for s in samples {
        lines.push_str(&serde_json::to_string(s).expect("sample serialize"));
        lines.push('\n');
    }
    let path = dir.join(DATASET_FILE);
    fs::write(&path, lines).map_err(io_err(&path))?;

    let path = dir.join(STATS_FILE);
    let mut stats = serde_json::to_string_pretty(&split.stats).expect("stats serialize");
    stats.push('\n');
    fs::write(&path, stats).map_err(io_err(&path))?;

    let path = dir.join(SPLIT_FILE);
    let file = SplitFile {
        seed: split.split_seed,
        train_devices: split.train_devices.clone(),
        test_devices: split.test_devices.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("split serialize");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

/// Writes an empty `dataset.jsonl` and a `split.json` with no devices. Used
/// when a fleet yields no labelled windows; no statistics can be fitted, so
/// `stats.json` is not written.
pub fn write_empty_dataset(dir: &Path, seed: u64) -> Result<(), DatasetError> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(DATASET_FILE);
    fs::write(&path, "").map_err(io_err(&path))?;
    let file = SplitFile {
        seed,
        train_devices: Vec::new(),
        test_devices: Vec::new(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("split serialize");
    text.push('\n');
    let path = dir.join(SPLIT_FILE);
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Vec<Sample>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                file: path.display().to_string(),
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Reads a directory written by [`write_dataset`]. Statistics are taken from
/// `stats.json` as stored, not refitted.
pub fn read_dataset(dir: &Path) -> Result<(Vec<Sample>, SplitDataset), DatasetError> {
    let samples = read_samples(&dir.join(DATASET_FILE))?;
    let read_json = |name: &str| -> Result<String, DatasetError> {
        let path = dir.join(name);
        fs::read_to_string(&path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let parse = |name: &str, e: serde_json::Error| DatasetError::Parse {
        file: dir.join(name).display().to_string(),
        line: e.line(),
        message: e.to_string(),
    };
    let stats: NormalizationStats =
        serde_json::from_str(&read_json(STATS_FILE)?).map_err(|e| parse(STATS_FILE, e))?;
    let split: SplitFile = serde_json::from_str(&read_json(SPLIT_FILE)?).map_err(|e| parse(SPLIT_FILE, e))?;
    let dataset = assemble(&samples, split.train_devices, split.test_devices, split.seed, Some(stats))?;
    Ok((samples, dataset))
}
