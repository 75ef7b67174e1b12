use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::tensor::Activation;

/// Number of operating-condition features fed to the CNN branch.
pub const N_CONDITIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// CNN over conditions and LSTM over the power window, fused.
    Hybrid,
    CnnOnly,
    LstmOnly,
    /// Dense network over the flat concatenation of window and conditions.
    Mlp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Hybrid, Variant::CnnOnly, Variant::LstmOnly, Variant::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Hybrid => "hybrid",
            Variant::CnnOnly => "cnn_only",
            Variant::LstmOnly => "lstm_only",
            Variant::Mlp => "mlp",
        }
    }

    pub fn uses_cnn(self) -> bool {
        matches!(self, Variant::Hybrid | Variant::CnnOnly)
    }

    pub fn uses_lstm(self) -> bool {
        matches!(self, Variant::Hybrid | Variant::LstmOnly)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| ModelError::config("variant", format!("unknown variant {s:?}")))
    }
}

/// Declarative description of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub conv_filters: Vec<usize>,
    pub conv_kernel: usize,
    pub pool_size: usize,
    /// Indices of the conv layers followed by a max-pool.
    pub pool_after: Vec<usize>,
    pub lstm_cells: Vec<usize>,
    pub head_width: usize,
    pub conv_activation: Activation,
    pub head_activation: Activation,
    /// Power readings per input window.
    pub window: usize,
    /// Seeds weight initialization.
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            variant: Variant::Hybrid,
            conv_filters: vec![32, 32, 16],
            conv_kernel: 3,
            pool_size: 2,
            pool_after: vec![0, 1],
            lstm_cells: vec![40, 20, 10],
            head_width: 64,
            conv_activation: Activation::Relu,
            head_activation: Activation::Relu,
            window: 3,
            seed: 0,
        }
    }
}

/// Widths implied by a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapePlan {
    /// Sequence length after the last conv/pool stage (0 when unused).
    pub cnn_length: usize,
    /// Flattened CNN output width (0 when the branch is absent).
    pub cnn_width: usize,
    /// Final LSTM hidden size (0 when the branch is absent).
    pub lstm_width: usize,
    pub head_input: usize,
}

impl ModelSpec {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn shape_plan(&self) -> Result<ShapePlan, ModelError> {
        if self.window == 0 {
            return Err(ModelError::config("input", "window length must be ≥ 1"));
        }
        if self.head_width == 0 {
            return Err(ModelError::config("head", "head width must be ≥ 1"));
        }
        let mut plan = ShapePlan {
            cnn_length: 0,
            cnn_width: 0,
            lstm_width: 0,
            head_input: 0,
        };
        if self.variant.uses_cnn() {
            if self.conv_filters.is_empty() {
                return Err(ModelError::config("conv", "at least one conv layer is required"));
            }
            if self.conv_kernel % 2 == 0 {
                return Err(ModelError::config(
                    "conv",
                    format!("kernel {} must be odd for same padding", self.conv_kernel),
                ));
            }
            if self.pool_size == 0 {
                return Err(ModelError::config("pool", "pool size must be ≥ 1"));
            }
            if let Some(bad) = self.pool_after.iter().find(|&&i| i >= self.conv_filters.len()) {
                return Err(ModelError::config(
                    "pool",
                    format!("pool placed after conv {bad}, but only {} conv layers exist", self.conv_filters.len()),
                ));
            }
            let mut len = N_CONDITIONS;
            for (i, &filters) in self.conv_filters.iter().enumerate() {
                if filters == 0 {
                    return Err(ModelError::config(&format!("conv {}", i + 1), "zero filters"));
                }
                if self.pool_after.contains(&i) {
                    if len < self.pool_size {
                        return Err(ModelError::config(
                            &format!("pool after conv {}", i + 1),
                            format!("length {len} is shorter than pool size {}", self.pool_size),
                        ));
                    }
                    len /= self.pool_size;
                }
            }
            plan.cnn_length = len;
            plan.cnn_width = len * self.conv_filters.last().copied().unwrap_or(0);
        }
        if self.variant.uses_lstm() {
            if self.lstm_cells.is_empty() || self.lstm_cells.contains(&0) {
                return Err(ModelError::config("lstm", "every LSTM layer needs at least one cell"));
            }
            plan.lstm_width = *self.lstm_cells.last().expect("non-empty");
        }
        plan.head_input = match self.variant {
            Variant::Mlp => self.window + N_CONDITIONS,
            _ => plan.cnn_width + plan.lstm_width,
        };
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hybrid_widths() {
        let plan = ModelSpec::default().shape_plan().unwrap();
        assert_eq!(plan.cnn_length, 1);
        assert_eq!(plan.cnn_width, 16);
        assert_eq!(plan.lstm_width, 10);
        assert_eq!(plan.head_input, 26);
    }

    #[test]
    fn ablation_head_widths() {
        assert_eq!(ModelSpec::with_variant(Variant::CnnOnly).shape_plan().unwrap().head_input, 16);
        assert_eq!(ModelSpec::with_variant(Variant::LstmOnly).shape_plan().unwrap().head_input, 10);
        assert_eq!(ModelSpec::with_variant(Variant::Mlp).shape_plan().unwrap().head_input, 9);
    }

    #[test]
    fn pooling_after_every_conv_collapses_the_sequence() {
        let spec = ModelSpec {
            pool_after: vec![0, 1, 2],
            ..ModelSpec::default()
        };
        let err = spec.shape_plan().unwrap_err();
        assert!(err.to_string().contains("pool after conv 3"), "{err}");
    }

    #[test]
    fn even_kernel_names_conv_stage() {
        let spec = ModelSpec {
            conv_kernel: 4,
            ..ModelSpec::default()
        };
        assert!(spec.shape_plan().unwrap_err().to_string().contains("conv"));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("lstm-only".parse::<Variant>().unwrap(), Variant::LstmOnly);
        assert!("svr".parse::<Variant>().is_err());
    }
}
