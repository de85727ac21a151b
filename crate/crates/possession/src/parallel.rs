//! Window-level parallelism on a fixed-size rayon pool.

use possession_core::scorer::{window_loss_and_grad, LossParts};
use possession_core::train::{GradientEvaluator, TrainingExample};
use possession_core::{RuleSet, ScorerError, ScorerModel};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

pub fn thread_pool(jobs: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Computes per-window gradients on the pool. Results come back in batch
/// order, so the reduction in the trainer does not depend on scheduling.
pub struct Parallel<'a> {
    pub pool: &'a ThreadPool,
}

impl GradientEvaluator for Parallel<'_> {
    fn evaluate(
        &self,
        model: &ScorerModel,
        rules: &RuleSet,
        batch: &[&TrainingExample],
    ) -> Result<Vec<(LossParts, Vec<f64>)>, ScorerError> {
        self.pool.install(|| batch.par_iter().map(|ex| window_loss_and_grad(model, &ex.window, rules, &ex.gold)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use possession_core::features::Normalization;
    use possession_core::synth::{generate_match, SynthConfig};
    use possession_core::train::{train, Sequential, TrainConfig};
    use possession_core::{ModelMode, PossessionPath};

    #[test]
    fn matches_sequential_training() {
        let cfg = SynthConfig { n_per_team: 3, episodes: 1, episode_s: 20.0, seed: 3, ..SynthConfig::default() };
        let m = generate_match(&cfg).unwrap();
        let rules = cfg.roster().rules().unwrap();
        let ep = &m.episodes[0];
        let full = possession_core::labeling::resample(&ep.episode, 5.0, Default::default()).unwrap().tracking_window().unwrap();
        let data: Vec<TrainingExample> = (0..full.steps() - 20)
            .step_by(10)
            .map(|s| TrainingExample { window: full.slice(s, 20), gold: PossessionPath(ep.gold.edges()[s..s + 20].to_vec()) })
            .collect();
        let norm = Normalization::fit(data.iter().map(|d| &d.window), &rules).unwrap();
        let tc = TrainConfig { epochs: 2, batch_size: 3, learning_rate: 0.01, ..TrainConfig::default() };
        let mut a = ScorerModel::new(ModelMode::default(), &rules, norm.clone());
        let mut b = ScorerModel::new(ModelMode::default(), &rules, norm);
        let pool = thread_pool(3).unwrap();
        let ra = train(&mut a, &rules, &data, &tc, &Sequential).unwrap();
        let rb = train(&mut b, &rules, &data, &tc, &Parallel { pool: &pool }).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }
}
