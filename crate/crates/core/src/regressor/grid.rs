use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{init_model, loss_mse};
use super::train::train;
use super::{MlpConfig, RegressorError};

const SPLIT_STREAM: u64 = 2;

/// Candidate settings: every learning rate is tried with every hidden-layer
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub hidden_dims: Vec<Vec<usize>>,
}

impl GridSpec {
    /// `config.lr_grid` with the configured hidden layers fixed.
    pub fn learning_rates_only(config: &MlpConfig) -> Self {
        Self {
            learning_rates: config.lr_grid.clone(),
            hidden_dims: vec![config.hidden_dims.clone()],
        }
    }

    /// `config.lr_grid` crossed with [`hidden_dims_grid`].
    pub fn with_hidden_search(config: &MlpConfig) -> Self {
        Self {
            learning_rates: config.lr_grid.clone(),
            hidden_dims: hidden_dims_grid(),
        }
    }
}

/// All three-layer combinations of widths {10, 100, 1000}.
pub fn hidden_dims_grid() -> Vec<Vec<usize>> {
    const WIDTHS: [usize; 3] = [10, 100, 1000];
    let mut out = Vec::with_capacity(27);
    for a in WIDTHS {
        for b in WIDTHS {
            for c in WIDTHS {
                out.push(vec![a, b, c]);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub hidden_dims: Vec<usize>,
    /// Validation MSE; `+inf` when training diverged.
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: MlpConfig,
    pub selected: usize,
    pub points: Vec<GridPoint>,
}

/// Deterministic 80/20 split of `0..n` by a seeded shuffle.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64 * 0.2).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Trains one model per grid point on the training split and scores it by
/// validation MSE. The minimum wins; ties go to the smaller learning rate,
/// then to the earlier grid point.
pub fn grid_search(
    data: &[(Vec<f64>, f64)],
    config: &MlpConfig,
    spec: &GridSpec,
) -> Result<GridResult, RegressorError> {
    if spec.learning_rates.is_empty() || spec.hidden_dims.is_empty() {
        return Err(RegressorError::EmptyGrid);
    }
    if data.len() < 2 {
        return Err(RegressorError::TooFewSamples(data.len()));
    }
    let (train_idx, val_idx) = split_indices(data.len(), config.seed);
    let train_set: Vec<(Vec<f64>, f64)> = train_idx.iter().map(|&i| data[i].clone()).collect();
    let val_x: Vec<Vec<f64>> = val_idx.iter().map(|&i| data[i].0.clone()).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| data[i].1).collect();

    let mut points = Vec::new();
    let mut candidates = Vec::new();
    for hidden in &spec.hidden_dims {
        for &lr in &spec.learning_rates {
            let cfg = MlpConfig {
                learning_rate: lr,
                hidden_dims: hidden.clone(),
                ..config.clone()
            };
            let val_mse = match train(init_model(&cfg)?, &train_set) {
                Ok((model, _)) => {
                    let preds = model.predict_batch(&val_x)?;
                    loss_mse(&preds, &val_y)?
                }
                Err(RegressorError::NonFiniteLoss { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            points.push(GridPoint {
                learning_rate: lr,
                hidden_dims: hidden.clone(),
                val_mse: if val_mse.is_finite() { val_mse } else { f64::INFINITY },
            });
            candidates.push(cfg);
        }
    }

    let mut selected = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let best = &points[selected];
        if p.val_mse < best.val_mse || (p.val_mse == best.val_mse && p.learning_rate < best.learning_rate) {
            selected = i;
        }
    }
    Ok(GridResult {
        best: candidates.swap_remove(selected),
        selected,
        points,
    })
}
