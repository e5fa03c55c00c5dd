//! Multilayer-perceptron regressor trained with Adam.
//!
//! Parameters live in one flat vector in canonical order: for each layer
//! (input side first) the weight matrix row-major as `[out][in]`, then the
//! bias vector. Gradients and optimizer moments share that order, and so
//! does the model file.

mod adam;
mod grid;
mod mlp;
mod persist;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adam::AdamState;
pub use grid::{grid_search, hidden_dims_grid, split_indices, GridPoint, GridResult, GridSpec};
pub use mlp::{gradients, init_model, loss_and_gradients, loss_mse, MlpModel};
pub use persist::{load_model, model_to_bytes, model_from_bytes, save_model, ModelFileError, MODEL_FORMAT_VERSION};
pub use train::{train, LrSchedule, TrainReport};

pub const DEFAULT_HIDDEN_DIMS: [usize; 3] = [1000, 100, 10];
pub const DEFAULT_LR_GRID: [f64; 3] = [0.01, 0.001, 0.0001];

#[derive(Debug, Error, PartialEq)]
pub enum RegressorError {
    #[error("invalid MLP configuration: {0}")]
    InvalidConfig(String),
    #[error("input has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{what} lengths differ: {left} vs {right}")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("no training data")]
    EmptyData,
    #[error("training loss became non-finite ({loss}) in epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("hyper-parameter grid is empty")]
    EmptyGrid,
    #[error("need at least 2 instances for a train/validation split, got {0}")]
    TooFewSamples(usize),
}

/// Architecture and optimisation settings of one regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub lr_grid: Vec<f64>,
    /// `None` means `min(200, n_samples)`.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Epochs without improvement before the learning rate is divided.
    pub lr_patience: usize,
    pub lr_decay_factor: f64,
    pub improvement_tol: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden_dims: DEFAULT_HIDDEN_DIMS.to_vec(),
            learning_rate: 0.001,
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            batch_size: None,
            max_epochs: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            lr_patience: 2,
            lr_decay_factor: 5.0,
            improvement_tol: 1e-4,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            ..Self::default()
        }
    }

    /// `(fan_in, fan_out)` of every layer, ending with the scalar output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }

    pub fn effective_batch_size(&self, n_samples: usize) -> usize {
        self.batch_size.unwrap_or(200).min(n_samples).max(1)
    }

    pub fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.input_dim == 0 {
            return bad("input_dim must be positive");
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return bad("hidden_dims must be non-empty and positive");
        }
        if !positive(self.learning_rate) || !self.lr_grid.iter().all(|&r| positive(r)) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == Some(0) {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !positive(self.adam_epsilon) {
            return bad("adam_epsilon must be positive");
        }
        if self.lr_patience == 0 || !(self.lr_decay_factor.is_finite() && self.lr_decay_factor >= 1.0) {
            return bad("lr_patience must be positive and lr_decay_factor >= 1");
        }
        if !(self.improvement_tol.is_finite() && self.improvement_tol >= 0.0) {
            return bad("improvement_tol must be non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = MlpConfig::new(2326);
        assert_eq!(c.hidden_dims, [1000, 100, 10]);
        assert_eq!(c.lr_grid, [0.01, 0.001, 0.0001]);
        assert_eq!(c.effective_batch_size(50), 50);
        assert_eq!(c.effective_batch_size(5000), 200);
        assert_eq!(c.layer_dims(), [(2326, 1000), (1000, 100), (100, 10), (10, 1)]);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = MlpConfig::new(3);
        c.hidden_dims.clear();
        assert!(c.validate().is_err());
        let mut c = MlpConfig::new(3);
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let mut c = MlpConfig::new(3);
        c.lr_grid = vec![0.1, -1.0];
        assert!(c.validate().is_err());
        assert!(MlpConfig::new(0).validate().is_err());
    }
}
