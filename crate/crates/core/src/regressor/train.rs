use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::{loss_and_gradients, MlpModel};
use super::RegressorError;

// Separate ChaCha streams keep shuffling independent of initialization.
pub(super) const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured before each batch update.
    pub epoch_losses: Vec<f64>,
    /// Learning rate in effect during each epoch.
    pub learning_rates: Vec<f64>,
    pub final_learning_rate: f64,
    pub epochs_run: usize,
    pub seed: u64,
}

/// Divides the learning rate by `factor` once the epoch loss has failed to
/// beat the best loss so far by `tol` for `patience` consecutive epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub learning_rate: f64,
    best: f64,
    stale: usize,
    patience: usize,
    factor: f64,
    tol: f64,
}

impl LrSchedule {
    pub fn new(learning_rate: f64, patience: usize, factor: f64, tol: f64) -> Self {
        Self {
            learning_rate,
            best: f64::INFINITY,
            stale: 0,
            patience,
            factor,
            tol,
        }
    }

    /// Records an epoch loss; returns `true` if the rate was just reduced.
    pub fn observe(&mut self, loss: f64) -> bool {
        let improved = loss < self.best - self.tol;
        if loss < self.best {
            self.best = loss;
        }
        if improved {
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.learning_rate /= self.factor;
            self.stale = 0;
            return true;
        }
        false
    }
}

/// Mini-batch Adam training on `(features, target)` pairs for
/// `config.max_epochs` epochs. Batches are drawn from a fresh seeded shuffle
/// every epoch, so the result is a pure function of the inputs and seed.
pub fn train(mut model: MlpModel, data: &[(Vec<f64>, f64)]) -> Result<(MlpModel, TrainReport), RegressorError> {
    let config = model.config.clone();
    config.validate()?;
    if data.is_empty() {
        return Err(RegressorError::EmptyData);
    }
    for (x, _) in data {
        if x.len() != config.input_dim {
            return Err(RegressorError::DimensionMismatch {
                expected: config.input_dim,
                found: x.len(),
            });
        }
    }

    let n = data.len();
    let batch_size = config.effective_batch_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut adam = AdamState::new(model.params.len(), config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    let mut schedule = LrSchedule::new(
        config.learning_rate,
        config.lr_patience,
        config.lr_decay_factor,
        config.improvement_tol,
    );
    let mut order: Vec<usize> = (0..n).collect();
    let mut report = TrainReport {
        epoch_losses: Vec::with_capacity(config.max_epochs),
        learning_rates: Vec::with_capacity(config.max_epochs),
        final_learning_rate: config.learning_rate,
        epochs_run: 0,
        seed: config.seed,
    };

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let lr = schedule.learning_rate;
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk.iter().map(|&i| (&data[i].0[..], data[i].1)).collect();
            let (loss, grad) = loss_and_gradients(&model, &batch)?;
            if !loss.is_finite() {
                return Err(RegressorError::NonFiniteLoss { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            adam.step(&mut model.params, &grad, lr);
        }
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() {
            return Err(RegressorError::NonFiniteLoss { epoch, loss: epoch_loss });
        }
        report.epoch_losses.push(epoch_loss);
        report.learning_rates.push(lr);
        report.epochs_run = epoch;
        schedule.observe(epoch_loss);
    }
    if let Some(bad) = model.params.iter().find(|p| !p.is_finite()) {
        return Err(RegressorError::NonFiniteLoss {
            epoch: report.epochs_run,
            loss: *bad,
        });
    }
    report.final_learning_rate = schedule.learning_rate;
    Ok((model, report))
}
