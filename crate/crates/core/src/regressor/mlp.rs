use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{MlpConfig, RegressorError};
use crate::data::Task;
use crate::features::{FeatureLayout, ScalerParams};

/// A fully connected ReLU network with a single linear output.
///
/// `scaler`, `layout` and `task` describe the feature pipeline the network
/// was trained on; they are carried along so a saved model is self-contained.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub params: Vec<f64>,
    pub scaler: Option<ScalerParams>,
    pub layout: Option<FeatureLayout>,
    pub task: Option<Task>,
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases,
/// drawn from a ChaCha8 stream seeded with `config.seed`.
pub fn init_model(config: &MlpConfig) -> Result<MlpModel, RegressorError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::with_capacity(config.param_count());
    for (fan_in, fan_out) in config.layer_dims() {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        params.extend((0..fan_in * fan_out).map(|_| dist.sample(&mut rng)));
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(MlpModel {
        config: config.clone(),
        params,
        scaler: None,
        layout: None,
        task: None,
    })
}

impl MlpModel {
    /// Weight matrix and bias of layer `idx` as flat slices.
    pub fn layer(&self, idx: usize) -> (&[f64], &[f64]) {
        let dims = self.config.layer_dims();
        let offset: usize = dims[..idx].iter().map(|&(i, o)| i * o + o).sum();
        let (fan_in, fan_out) = dims[idx];
        let w = &self.params[offset..offset + fan_in * fan_out];
        let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (w, b)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), RegressorError> {
        if x.len() != self.config.input_dim {
            return Err(RegressorError::DimensionMismatch {
                expected: self.config.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Runs the network, storing every layer's output in `acts`
    /// (`acts[0]` is the input). Returns the scalar prediction.
    fn forward_into(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        let dims = self.config.layer_dims();
        let last = dims.len() - 1;
        acts.clear();
        acts.push(x.to_vec());
        let mut offset = 0;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let input = &acts[l];
            let out: Vec<f64> = w
                .chunks_exact(fan_in)
                .zip(b)
                .map(|(row, bias)| {
                    let z = dot(row, input) + bias;
                    if l < last {
                        z.max(0.0)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts[last + 1][0]
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, RegressorError> {
        self.check_input(x)?;
        let mut acts = Vec::new();
        Ok(self.forward_into(x, &mut acts))
    }

    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>, RegressorError> {
        let mut acts = Vec::new();
        xs.iter()
            .map(|x| {
                self.check_input(x)?;
                Ok(self.forward_into(x, &mut acts))
            })
            .collect()
    }

    /// Adds `dscale · d(out)/dθ` for one sample to `grad`, given the stored
    /// activations of a preceding `forward_into`.
    fn backward_into(&self, acts: &[Vec<f64>], dscale: f64, grad: &mut [f64]) {
        let dims = self.config.layer_dims();
        let offsets: Vec<usize> = dims
            .iter()
            .scan(0, |acc, &(i, o)| {
                let start = *acc;
                *acc += i * o + o;
                Some(start)
            })
            .collect();
        let mut delta = vec![dscale];
        for l in (0..dims.len()).rev() {
            let (fan_in, fan_out) = dims[l];
            let start = offsets[l];
            let input = &acts[l];
            {
                let (gw, gb) = grad[start..start + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for ((grow, gbias), &d) in gw.chunks_exact_mut(fan_in).zip(gb.iter_mut()).zip(&delta) {
                    if d == 0.0 {
                        continue;
                    }
                    *gbias += d;
                    for (g, &a) in grow.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[start..start + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for (row, &d) in w.chunks_exact(fan_in).zip(&delta) {
                if d == 0.0 {
                    continue;
                }
                for (p, &wv) in prev.iter_mut().zip(row) {
                    *p += d * wv;
                }
            }
            // ReLU: pass the signal only where the unit was strictly active.
            for (p, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean of squared residuals.
pub fn loss_mse(predictions: &[f64], targets: &[f64]) -> Result<f64, RegressorError> {
    if predictions.len() != targets.len() {
        return Err(RegressorError::LengthMismatch {
            what: "prediction/target",
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(RegressorError::EmptyData);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

/// Batch-mean MSE and its exact gradient with respect to every parameter.
pub fn loss_and_gradients(
    model: &MlpModel,
    batch: &[(&[f64], f64)],
) -> Result<(f64, Vec<f64>), RegressorError> {
    if batch.is_empty() {
        return Err(RegressorError::EmptyData);
    }
    let mut grad = vec![0.0; model.params.len()];
    let mut acts = Vec::new();
    let scale = 2.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &(x, target) in batch {
        model.check_input(x)?;
        let residual = model.forward_into(x, &mut acts) - target;
        loss += residual * residual;
        model.backward_into(&acts, scale * residual, &mut grad);
    }
    Ok((loss / batch.len() as f64, grad))
}

/// Gradient of the batch-mean MSE, in canonical parameter order. The ReLU
/// subgradient at 0 is taken as 0.
pub fn gradients(model: &MlpModel, batch: &[(&[f64], f64)]) -> Result<Vec<f64>, RegressorError> {
    loss_and_gradients(model, batch).map(|(_, g)| g)
}
