//! Trainable classification heads over frozen descriptors.
//!
//! [`SoftmaxHead`] classifies one descriptor per step; [`GruClassifier`]
//! consumes the per-frame descriptors in order and classifies from the final
//! hidden state. Gradients are computed by hand and verified against central
//! finite differences with [`grad_check`].
//!
//! All arithmetic is f64 and single-threaded with fixed summation order, so
//! training is bit-reproducible for a given data order and seed.

mod checkpoint;
mod gru;
pub mod linalg;
mod optim;
mod softmax;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointDims, CheckpointHeader, HED_MAGIC};
pub use gru::{GruClassifier, GruDims};
pub use optim::{Optimizer, OptimizerState};
pub use softmax::SoftmaxHead;

use crate::embed::EmbeddedStep;
use crate::synth::mix_seed;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("training data contains fewer than two classes")]
    SingleClassData,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Arch {
    Softmax,
    Gru { hidden: usize },
}

impl Arch {
    pub fn name(&self) -> &'static str {
        match self {
            Arch::Softmax => "softmax",
            Arch::Gru { .. } => "gru",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            seed: 0,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 {
            return Err("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(format!("l2 must be non-negative, got {}", self.l2));
        }
        Ok(())
    }
}

/// One labeled training example: an ordered list of descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub label: usize,
}

impl Sample {
    pub fn from_step(step: &EmbeddedStep, label: usize) -> Self {
        Self {
            inputs: step.descriptors.iter().map(|d| d.to_f64()).collect(),
            label,
        }
    }

    pub fn single(x: Vec<f64>, label: usize) -> Self {
        Self {
            inputs: vec![x],
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HeadModel {
    Softmax(SoftmaxHead),
    Gru(GruClassifier),
}

/// Element-wise mean of the descriptors; what the softmax head sees when a
/// step carries more than one.
fn pooled(inputs: &[Vec<f64>]) -> Result<Vec<f64>, HeadError> {
    match inputs {
        [] => Err(HeadError::EmptySequence),
        [x] => Ok(x.clone()),
        _ => {
            let mut m = vec![0.0; inputs[0].len()];
            for x in inputs {
                if x.len() != m.len() {
                    return Err(HeadError::DimMismatch {
                        expected: m.len(),
                        actual: x.len(),
                    });
                }
                for (a, v) in m.iter_mut().zip(x) {
                    *a += v;
                }
            }
            let n = inputs.len() as f64;
            m.iter_mut().for_each(|a| *a /= n);
            Ok(m)
        }
    }
}

impl HeadModel {
    /// Fresh model with parameters drawn from `Uniform(±1/sqrt(fan_in))`.
    pub fn init(arch: Arch, input_dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x494e_4954));
        let mut fill = |out: &mut [f64], fan_in: usize| {
            let a = 1.0 / (fan_in as f64).sqrt();
            out.iter_mut().for_each(|v| *v = rng.random_range(-a..a));
        };
        match arch {
            Arch::Softmax => {
                let mut h = SoftmaxHead::zeros(classes, input_dim);
                fill(h.params_mut(), input_dim);
                HeadModel::Softmax(h)
            }
            Arch::Gru { hidden } => {
                let dims = GruDims {
                    input: input_dim,
                    hidden,
                    classes,
                };
                let mut g = GruClassifier::zeros(dims);
                let w = g.input_weight_ranges();
                let (u, b, v, c) = g.recurrent_ranges();
                for r in w {
                    fill(&mut g.params_mut()[r], input_dim);
                }
                for r in u.into_iter().chain(b).chain([v, c]) {
                    fill(&mut g.params_mut()[r], hidden);
                }
                HeadModel::Gru(g)
            }
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            HeadModel::Softmax(_) => Arch::Softmax,
            HeadModel::Gru(g) => Arch::Gru {
                hidden: g.dims().hidden,
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            HeadModel::Softmax(h) => h.dim(),
            HeadModel::Gru(g) => g.dims().input,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            HeadModel::Softmax(h) => h.classes(),
            HeadModel::Gru(g) => g.dims().classes,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            HeadModel::Softmax(h) => h.params(),
            HeadModel::Gru(g) => g.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            HeadModel::Softmax(h) => h.params_mut(),
            HeadModel::Gru(g) => g.params_mut(),
        }
    }

    pub fn predict_proba(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, HeadError> {
        match self {
            HeadModel::Softmax(h) => h.forward(&pooled(inputs)?),
            HeadModel::Gru(g) => g.classify(inputs),
        }
    }

    /// Most probable class; lowest index wins ties.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<usize, HeadError> {
        Ok(linalg::argmax(&self.predict_proba(inputs)?))
    }

    /// Cross-entropy of one sample, without regularization.
    pub fn sample_loss(&self, s: &Sample) -> Result<f64, HeadError> {
        match self {
            HeadModel::Softmax(h) => h.loss(&pooled(&s.inputs)?, s.label),
            HeadModel::Gru(g) => g.loss(&s.inputs, s.label),
        }
    }

    pub fn sample_loss_grad(&self, s: &Sample, grad: &mut [f64]) -> Result<f64, HeadError> {
        match self {
            HeadModel::Softmax(h) => h.loss_grad(&pooled(&s.inputs)?, s.label, grad),
            HeadModel::Gru(g) => g.loss_grad(&s.inputs, s.label, grad),
        }
    }

    /// Mean cross-entropy over `data` plus `l2 * ||params||^2`.
    pub fn objective(&self, data: &[Sample], l2: f64) -> Result<f64, HeadError> {
        let mut total = 0.0;
        for s in data {
            total += self.sample_loss(s)?;
        }
        Ok(total / data.len() as f64 + l2 * self.params().iter().map(|p| p * p).sum::<f64>())
    }

    pub fn accuracy(&self, data: &[Sample]) -> Result<f64, HeadError> {
        let mut correct = 0usize;
        for s in data {
            correct += usize::from(self.predict(&s.inputs)? == s.label);
        }
        Ok(correct as f64 / data.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HeadModel,
    /// Objective of the initial parameters over the full data.
    pub initial_loss: f64,
    /// Per epoch: mean sample loss seen during the epoch plus the
    /// regularizer at epoch end.
    pub loss_curve: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        self.loss_curve.last().copied().unwrap_or(self.initial_loss)
    }
}

fn validate_data(data: &[Sample], classes: usize) -> Result<usize, HeadError> {
    let first = data.first().ok_or(HeadError::SingleClassData)?;
    let dim = first.inputs.first().ok_or(HeadError::EmptySequence)?.len();
    let mut seen = vec![false; classes];
    for s in data {
        if s.label >= classes {
            return Err(HeadError::BadLabel {
                label: s.label,
                classes,
            });
        }
        seen[s.label] = true;
        if s.inputs.is_empty() {
            return Err(HeadError::EmptySequence);
        }
        if let Some(x) = s.inputs.iter().find(|x| x.len() != dim) {
            return Err(HeadError::DimMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(HeadError::SingleClassData);
    }
    Ok(dim)
}

/// Minibatch training of a fresh head. Batches follow a seeded per-epoch
/// shuffle; within a batch, per-sample gradients are summed in batch order.
pub fn train_head(data: &[Sample], classes: usize, arch: Arch, cfg: &TrainConfig) -> Result<TrainOutcome, HeadError> {
    let dim = validate_data(data, classes)?;
    let mut model = HeadModel::init(arch, dim, classes, cfg.seed);
    let initial_loss = model.objective(data, cfg.l2)?;
    let n_params = model.params().len();
    let mut state = OptimizerState::new(cfg.optimizer, n_params);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; n_params];
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let batch = cfg.batch_size.max(1);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut seen_loss = 0.0;
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                seen_loss += model.sample_loss_grad(&data[i], &mut grad)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            for (g, p) in grad.iter_mut().zip(model.params()) {
                *g = *g * scale + 2.0 * cfg.l2 * p;
            }
            state.apply(model.params_mut(), &grad, cfg.learning_rate);
        }
        let reg = cfg.l2 * model.params().iter().map(|p| p * p).sum::<f64>();
        let epoch_loss = seen_loss / data.len() as f64 + reg;
        if !epoch_loss.is_finite() {
            return Err(HeadError::NonFinite(format!("loss diverged at epoch {epoch}")));
        }
        loss_curve.push(epoch_loss);
    }
    Ok(TrainOutcome {
        model,
        initial_loss,
        loss_curve,
    })
}

pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Analytic and central-difference gradients of one sample's cross-entropy.
pub fn gradient_pair(model: &HeadModel, sample: &Sample) -> Result<(Vec<f64>, Vec<f64>), HeadError> {
    let mut analytic = vec![0.0; model.params().len()];
    model.sample_loss_grad(sample, &mut analytic)?;
    let mut probe = model.clone();
    let mut numeric = Vec::with_capacity(analytic.len());
    for i in 0..analytic.len() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + GRAD_CHECK_STEP;
        let up = probe.sample_loss(sample)?;
        probe.params_mut()[i] = orig - GRAD_CHECK_STEP;
        let down = probe.sample_loss(sample)?;
        probe.params_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * GRAD_CHECK_STEP));
    }
    Ok((analytic, numeric))
}

/// Largest `|a - n| / max(|a| + |n|, 1e-8)` over all parameters.
pub fn grad_check(model: &HeadModel, sample: &Sample) -> Result<f64, HeadError> {
    let (a, n) = gradient_pair(model, sample)?;
    Ok(a.iter()
        .zip(&n)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max))
}
