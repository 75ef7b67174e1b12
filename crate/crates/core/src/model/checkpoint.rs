//! Plain-text checkpoints.
//!
//! ```text
//! format_version = 1
//! variant = hybrid
//! conv_filters = 32,32,16
//! ...
//! param_count = 19417
//! [params]
//! <one value per line>
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a save/load
//! cycle is bit-exact. Parameters follow [`Network::params`] order (conv
//! layers, LSTM layers bottom to top, hidden dense, output dense), weights
//! before biases within each group, each tensor row-major.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::{ModelError, ModelSpec, Network, TrainedModel, TrainingMeta, Variant};
use crate::dataset::{FeatureRange, NormalizationStats};
use crate::tensor::Activation;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

const PARAMS_MARKER: &str = "[params]";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("checkpoint line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("checkpoint is missing field `{0}`")]
    MissingField(String),
    #[error("unsupported checkpoint format_version {found} (this build reads {CHECKPOINT_FORMAT_VERSION})")]
    UnsupportedVersion { found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

impl TrainedModel {
    pub fn to_checkpoint_string(&self) -> String {
        let spec = self.network.spec();
        let stats = &self.stats;
        let meta = &self.meta;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            writeln!(out, "{k} = {v}").expect("write to string");
        };
        kv("format_version", CHECKPOINT_FORMAT_VERSION.to_string());
        kv("variant", spec.variant.name().to_string());
        kv("conv_filters", join(&spec.conv_filters));
        kv("conv_kernel", spec.conv_kernel.to_string());
        kv("pool_size", spec.pool_size.to_string());
        kv("pool_after", join(&spec.pool_after));
        kv("lstm_cells", join(&spec.lstm_cells));
        kv("head_width", spec.head_width.to_string());
        kv("conv_activation", spec.conv_activation.name().to_string());
        kv("head_activation", spec.head_activation.name().to_string());
        kv("window", spec.window.to_string());
        kv("init_seed", spec.seed.to_string());
        let ranges: Vec<String> = stats.conditions.iter().map(|r| format!("{}:{}", r.min, r.max)).collect();
        kv("stats_conditions", ranges.join(","));
        kv("stats_power", format!("{}:{}", stats.power.min, stats.power.max));
        kv("stats_rul_cap_h", stats.rul_cap_h.to_string());
        kv("stats_fingerprint", self.fingerprint.to_string());
        kv("epochs_run", meta.epochs_run.to_string());
        kv("best_epoch", opt(meta.best_epoch));
        kv("final_train_loss", opt(meta.final_train_loss));
        kv("final_val_loss", opt(meta.final_val_loss));
        kv("train_seed", meta.seed.to_string());
        kv("param_count", self.network.param_count().to_string());
        out.push_str(PARAMS_MARKER);
        out.push('\n');
        for v in self.network.flat_params() {
            writeln!(out, "{v}").expect("write to string");
        }
        out
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self, CheckpointError> {
        let mut header: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut saw_marker = false;
        for (line, raw) in lines.by_ref() {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if l == PARAMS_MARKER {
                saw_marker = true;
                break;
            }
            let (k, v) = l.split_once('=').ok_or_else(|| CheckpointError::Parse {
                line,
                message: format!("expected `key = value`, found {l:?}"),
            })?;
            if header.insert(k.trim(), (line, v.trim())).is_some() {
                return Err(CheckpointError::Parse {
                    line,
                    message: format!("duplicate field `{}`", k.trim()),
                });
            }
        }
        let fields = Header(header);

        let (_, version) = fields.raw("format_version")?;
        if version != CHECKPOINT_FORMAT_VERSION.to_string() {
            return Err(CheckpointError::UnsupportedVersion {
                found: version.to_string(),
            });
        }

        let spec = ModelSpec {
            variant: fields.parse_with("variant", |s| s.parse::<Variant>().map_err(|e| e.to_string()))?,
            conv_filters: fields.list("conv_filters")?,
            conv_kernel: fields.value("conv_kernel")?,
            pool_size: fields.value("pool_size")?,
            pool_after: fields.list("pool_after")?,
            lstm_cells: fields.list("lstm_cells")?,
            head_width: fields.value("head_width")?,
            conv_activation: fields.parse_with("conv_activation", activation)?,
            head_activation: fields.parse_with("head_activation", activation)?,
            window: fields.value("window")?,
            seed: fields.value("init_seed")?,
        };
        let conditions: Vec<FeatureRange> = fields.parse_with("stats_conditions", |s| {
            s.split(',').map(range).collect::<Result<Vec<_>, _>>()
        })?;
        let conditions: [FeatureRange; 6] = conditions.try_into().map_err(|v: Vec<FeatureRange>| {
            fields.error("stats_conditions", format!("expected 6 ranges, found {}", v.len()))
        })?;
        let stats = NormalizationStats {
            conditions,
            power: fields.parse_with("stats_power", range)?,
            rul_cap_h: fields.value("stats_rul_cap_h")?,
        };
        let fingerprint = fields.raw("stats_fingerprint")?.1;
        if fingerprint != stats.fingerprint().to_string() {
            return Err(fields.error(
                "stats_fingerprint",
                format!("stored {fingerprint} does not match stats ({})", stats.fingerprint()),
            ));
        }
        let meta = TrainingMeta {
            epochs_run: fields.value("epochs_run")?,
            best_epoch: fields.optional("best_epoch")?,
            final_train_loss: fields.optional("final_train_loss")?,
            final_val_loss: fields.optional("final_val_loss")?,
            seed: fields.value("train_seed")?,
        };
        let declared: usize = fields.value("param_count")?;

        if !saw_marker {
            return Err(CheckpointError::MissingField(PARAMS_MARKER.into()));
        }
        let mut values = Vec::with_capacity(declared);
        for (line, raw) in lines {
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            let v: f64 = l.parse().map_err(|_| CheckpointError::Parse {
                line,
                message: format!("invalid parameter value {l:?}"),
            })?;
            values.push(v);
        }

        let mut network = Network::build(&spec)?;
        let expected = network.param_count();
        if declared != expected || values.len() != expected {
            return Err(ModelError::ParamCount {
                expected,
                found: if declared != expected { declared } else { values.len() },
            }
            .into());
        }
        network.load_flat(&values)?;
        Ok(TrainedModel::new(network, stats, meta))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_checkpoint_string()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_checkpoint_str(&text)
    }
}

fn activation(s: &str) -> Result<Activation, String> {
    Activation::parse(s).ok_or_else(|| format!("unknown activation {s:?}"))
}

fn range(s: &str) -> Result<FeatureRange, String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected `min:max`, found {s:?}"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok(FeatureRange {
        min: num(lo)?,
        max: num(hi)?,
    })
}

struct Header<'a>(BTreeMap<&'a str, (usize, &'a str)>);

impl<'a> Header<'a> {
    fn raw(&self, key: &str) -> Result<(usize, &'a str), CheckpointError> {
        self.0
            .get(key)
            .copied()
            .ok_or_else(|| CheckpointError::MissingField(key.to_string()))
    }

    fn error(&self, key: &str, message: String) -> CheckpointError {
        let line = self.0.get(key).map_or(0, |(l, _)| *l);
        CheckpointError::Parse {
            line,
            message: format!("field `{key}`: {message}"),
        }
    }

    fn parse_with<T>(&self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, CheckpointError> {
        let (_, v) = self.raw(key)?;
        f(v).map_err(|m| self.error(key, m))
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<T, CheckpointError>
    where
        T::Err: ToString,
    {
        self.parse_with(key, |s| s.parse::<T>().map_err(|e| format!("{s:?}: {}", e.to_string())))
    }

    fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, CheckpointError>
    where
        T::Err: ToString,
    {
        self.parse_with(key, |s| match s {
            "none" => Ok(None),
            _ => s.parse::<T>().map(Some).map_err(|e| format!("{s:?}: {}", e.to_string())),
        })
    }

    fn list(&self, key: &str) -> Result<Vec<usize>, CheckpointError> {
        self.parse_with(key, |s| {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}")))
                .collect()
        })
    }
}
