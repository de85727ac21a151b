//! Minibatch training of a [`ScorerModel`] with Adam.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::PossessionPath;
use crate::graph::RuleSet;
use crate::scorer::{window_loss_and_grad, LossParts, ScorerModel};
use crate::window::TrackingWindow;
use crate::ScorerError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 20, batch_size: 32, learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, seed: 0 }
    }
}

/// A training window and its gold possession path.
#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub window: TrackingWindow,
    pub gold: PossessionPath,
}

/// Computes per-window losses and gradients for a batch.
///
/// Implementations may evaluate windows concurrently but must return results
/// in batch order so the reduction is deterministic.
pub trait GradientEvaluator {
    fn evaluate(
        &self,
        model: &ScorerModel,
        rules: &RuleSet,
        batch: &[&TrainingExample],
    ) -> Result<Vec<(LossParts, Vec<f64>)>, ScorerError>;
}

/// Evaluates windows one after another.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl GradientEvaluator for Sequential {
    fn evaluate(
        &self,
        model: &ScorerModel,
        rules: &RuleSet,
        batch: &[&TrainingExample],
    ) -> Result<Vec<(LossParts, Vec<f64>)>, ScorerError> {
        batch.iter().map(|ex| window_loss_and_grad(model, &ex.window, rules, &ex.gold)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, config: &TrainConfig) -> Adam {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.epsilon,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (libm::sqrt(vh) + self.eps);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-window loss of each epoch, measured before each batch update.
    pub epoch_losses: Vec<LossParts>,
}

/// Trains `model` in place. Deterministic for a fixed seed and evaluator ordering.
pub fn train(
    model: &mut ScorerModel,
    rules: &RuleSet,
    data: &[TrainingExample],
    config: &TrainConfig,
    evaluator: &impl GradientEvaluator,
) -> Result<TrainReport, ScorerError> {
    if data.is_empty() {
        return Err(ScorerError::EmptyDataset);
    }
    model.validate(rules)?;
    for (i, ex) in data.iter().enumerate() {
        if ex.gold.len() != ex.window.steps() {
            return Err(ScorerError::GoldLength { window: i, gold: ex.gold.len(), steps: ex.window.steps() });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = model.params();
    let mut adam = Adam::new(params.len(), config);
    let batch_size = config.batch_size.max(1);
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossParts::default();
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let batch: Vec<&TrainingExample> = chunk.iter().map(|&i| &data[i]).collect();
            let results = evaluator.evaluate(model, rules, &batch)?;
            let mut grad = vec![0.0; params.len()];
            let scale = 1.0 / results.len() as f64;
            for (loss, g) in &results {
                if !loss.total.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(ScorerError::Diverged { epoch, batch: b, loss: loss.total });
                }
                epoch_loss += *loss;
                for (acc, x) in grad.iter_mut().zip(g) {
                    *acc += x * scale;
                }
            }
            adam.update(&mut params, &grad);
            model.set_params(&params);
        }
        let mean = epoch_loss.scaled(1.0 / data.len() as f64);
        log::info!("epoch {} loss {:.4} (crf {:.4}, coarse {:.4}, emit {:.4})", epoch + 1, mean.total, mean.crf, mean.coarse, mean.emit);
        report.epoch_losses.push(mean);
    }
    Ok(report)
}
