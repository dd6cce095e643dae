//! Minibatch SGD training and RCE evaluation.

pub mod compare;
pub mod metrics;
pub mod model;
pub mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use metrics::{evaluate_predictions, label_mean, rce, reference_entropy, CrossEntropy, EvalResult};
pub use model::{sigmoid, Example, Gradients, Model, ModelHead};
pub use synthetic::{make_synthetic_dataset, write_events_file, GroundTruth, Manifest, NamespaceSpec, SyntheticData, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub model: ModelHead,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 128,
            epochs: 1,
            model: ModelHead::LogisticBilinear,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate", format!("must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

/// One SGD step on the mean loss of `batch`. Returns the loss before the step.
pub fn sgd_step(model: &mut Model, batch: &[Example], lr: f64, grads: &mut Gradients) -> Result<f64> {
    let loss = model.loss_and_grad(batch, grads)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("batch loss is {loss}")));
    }
    model.apply(grads, lr);
    Ok(loss)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch, averaged over its steps.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

fn run_epoch(
    model: &mut Model,
    examples: &[Example],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
    order: &mut Vec<usize>,
    batch: &mut Vec<Example>,
    grads: &mut Gradients,
) -> Result<(f64, usize)> {
    order.clear();
    order.extend(0..examples.len());
    if config.shuffle {
        order.shuffle(rng);
    }
    let (mut total, mut steps) = (0.0, 0);
    for chunk in order.chunks(config.batch_size) {
        batch.clear();
        batch.extend(chunk.iter().map(|&i| examples[i].clone()));
        total += sgd_step(model, batch, config.learning_rate, grads)? * chunk.len() as f64;
        steps += 1;
    }
    Ok((total / examples.len().max(1) as f64, steps))
}

/// Trains for `config.epochs` passes over `examples`.
pub fn train(model: &mut Model, examples: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Empty("no training examples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut order, mut batch, mut grads) = (Vec::new(), Vec::new(), Gradients::default());
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        let (loss, steps) = run_epoch(model, examples, config, &mut rng, &mut order, &mut batch, &mut grads)?;
        log::debug!("epoch {epoch}: loss {loss:.6}");
        report.epoch_losses.push(loss);
        report.steps += steps;
    }
    Ok(report)
}

/// Evaluates against `base_rate`, normally the training label mean.
pub fn evaluate(model: &Model, examples: &[Example], base_rate: f64) -> Result<EvalResult> {
    if examples.is_empty() {
        return Err(Error::Empty("no evaluation examples"));
    }
    let probs = model.predict_all(examples);
    evaluate_predictions(examples.iter().map(|e| e.label).zip(probs), base_rate)
}

/// Prequential evaluation: each chunk is scored by the model trained on all
/// earlier chunks, then trained on.
pub fn continuous_eval(
    model: &mut Model,
    chunks: &[Vec<Example>],
    config: &TrainConfig,
    base_rate: f64,
) -> Result<Vec<EvalResult>> {
    if chunks.len() < 2 {
        return Err(Error::invalid("chunks", format!("need at least 2 chunks, got {}", chunks.len())));
    }
    config.validate()?;
    let mut results = Vec::with_capacity(chunks.len());
    for (i, chunk) in chunks.iter().enumerate() {
        results.push(evaluate(model, chunk, base_rate)?);
        let cfg = TrainConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..*config
        };
        train(model, chunk, &cfg)?;
    }
    Ok(results)
}
