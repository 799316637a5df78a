use rand::seq::SliceRandom;

use super::{DenseNetwork, Gradients, LossKind, Targets};
use crate::error::{ensure_dim, Error, Result};
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    GradientDescent,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::GradientDescent => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OptimizerKind::GradientDescent),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Zero is allowed and leaves the network untouched.
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            loss: LossKind::CrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(kind: OptimizerKind, lr: f64, params: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::Adam => (vec![0.0; params], vec![0.0; params]),
            OptimizerKind::GradientDescent => (Vec::new(), Vec::new()),
        };
        Self { kind, lr, m, v, step: 0 }
    }

    fn apply(&mut self, net: &mut DenseNetwork, grads: &Gradients) {
        let flat = grads.flatten();
        match self.kind {
            OptimizerKind::GradientDescent => {
                net.params_mut().zip(&flat).for_each(|(p, g)| *p -= self.lr * g);
            }
            OptimizerKind::Adam => {
                self.step += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.step);
                let c2 = 1.0 - Self::BETA2.powi(self.step);
                for (i, (p, g)) in net.params_mut().zip(&flat).enumerate() {
                    self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
                    self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    *p -= self.lr * mh / (vh.sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// Step-at-a-time training for callers that assemble their own batches.
pub struct Trainer {
    net: DenseNetwork,
    opt: Optimizer,
    loss: LossKind,
}

impl Trainer {
    pub fn new(net: DenseNetwork, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.parameter_count());
        Ok(Self { net, opt, loss: cfg.loss })
    }

    /// Overrides the configured loss.
    pub fn with_loss(mut self, loss: LossKind) -> Self {
        self.loss = loss;
        self
    }

    /// One optimizer step on the batch. Returns the batch-mean loss before the step.
    pub fn step(&mut self, inputs: &[Vec<f64>], targets: Targets<'_>) -> Result<f64> {
        let (value, grads) = self.net.loss_and_gradients(inputs, targets, self.loss)?;
        self.opt.apply(&mut self.net, &grads);
        Ok(value)
    }

    pub fn network(&self) -> &DenseNetwork {
        &self.net
    }

    pub fn into_network(self) -> DenseNetwork {
        self.net
    }
}

/// Minibatch training. Returns the trained network and the mean loss of every epoch.
pub fn train(
    net: &DenseNetwork,
    inputs: &[Vec<f64>],
    targets: Targets<'_>,
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, Vec<f64>)> {
    train_with_augmentation(net, inputs, targets, cfg, |_, _| {})
}

/// Like [`train`], but `augment` may rewrite each example (in a scratch copy)
/// every time it is visited. The augmentation stream is seeded from `cfg.seed`.
pub fn train_with_augmentation<F>(
    net: &DenseNetwork,
    inputs: &[Vec<f64>],
    targets: Targets<'_>,
    cfg: &TrainConfig,
    mut augment: F,
) -> Result<(DenseNetwork, Vec<f64>)>
where
    F: FnMut(&mut [f64], &mut StreamRng),
{
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::Empty("training set"));
    }
    ensure_dim(inputs.len(), targets.len())?;
    for x in inputs {
        ensure_dim(net.input_dim(), x.len())?;
    }

    let mut net = net.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut shuffle_rng = rng::substream(cfg.seed, 0);
    let mut noise_rng = rng::substream(cfg.seed, 1);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.parameter_count());
    let mut scratch = vec![0.0; net.input_dim()];

    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(&net);
            let mut batch_loss = 0.0;
            for &i in batch {
                scratch.copy_from_slice(&inputs[i]);
                augment(&mut scratch, &mut noise_rng);
                batch_loss += net.accumulate(&scratch, targets.get(i), cfg.loss, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            opt.apply(&mut net, &grads);
            epoch_loss += batch_loss;
        }
        history.push(epoch_loss / inputs.len() as f64);
    }
    Ok((net, history))
}
