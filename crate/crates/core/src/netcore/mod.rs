//! Minimal dense feed-forward network with analytic gradients.
//!
//! Hidden layers share one activation; the last layer emits raw logits.
//! Weights are stored row-major as `outputs x inputs`.

mod checkpoint;
mod train;

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use train::{train, train_with_augmentation, OptimizerKind, TrainConfig, Trainer};

use rand::Rng;

use crate::classifier::Classifier;
use crate::error::{ensure_dim, Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_at_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    CrossEntropy,
    /// Sum of absolute differences between student and teacher logits.
    L1Logit,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::CrossEntropy => "cross-entropy",
            LossKind::L1Logit => "l1-logit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cross-entropy" => Some(LossKind::CrossEntropy),
            "l1-logit" => Some(LossKind::L1Logit),
            _ => None,
        }
    }
}

/// Supervision for one batch: class labels or teacher logit vectors.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Logits(&'a [Vec<f64>]),
}

impl Targets<'_> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Logits(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, i: usize) -> Target<'_> {
        match self {
            Targets::Labels(l) => Target::Label(l[i]),
            Targets::Logits(l) => Target::Logits(&l[i]),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Target<'a> {
    Label(usize),
    Logits(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().copied());
        for (o, row) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs)) {
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
    activation: Activation,
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            v.iter_mut().for_each(|g| *g *= s);
        }
    }

    /// Flattened in the same order as [`DenseNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }
}

impl DenseNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = rng::seeded(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Layer::zeros(fan_in, fan_out);
                layer
                    .weights
                    .iter_mut()
                    .for_each(|v| *v = rng.random_range(-limit..=limit));
                layer
            })
            .collect();
        Ok(Self { layers, activation })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(Self { layers, activation })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("network layers"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 {
                return Err(Error::invalid("layer_sizes", "layer sizes must be positive"));
            }
            ensure_dim(l.inputs * l.outputs, l.weights.len())?;
            ensure_dim(l.outputs, l.bias.len())?;
            if i > 0 {
                ensure_dim(layers[i - 1].outputs, l.inputs)?;
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_dim(self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Post-activation values of every layer, input first, logits last.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(&acts[i], &mut out);
            if i < last {
                out.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            acts.push(out);
        }
        acts
    }

    /// Per-sample loss and gradient with respect to the logits.
    fn output_loss(&self, logits: &[f64], target: Target<'_>, loss: LossKind) -> Result<(f64, Vec<f64>)> {
        let classes = logits.len();
        match (loss, target) {
            (LossKind::CrossEntropy, Target::Label(y)) => {
                if y >= classes {
                    return Err(Error::invalid("label", format!("{y} >= {classes} classes")));
                }
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
                let total: f64 = exps.iter().sum();
                let lse = m + total.ln();
                let mut g: Vec<f64> = exps.iter().map(|e| e / total).collect();
                g[y] -= 1.0;
                Ok((lse - logits[y], g))
            }
            (LossKind::L1Logit, Target::Logits(t)) => {
                ensure_dim(classes, t.len())?;
                let mut value = 0.0;
                let g = logits
                    .iter()
                    .zip(t)
                    .map(|(a, b)| {
                        let d = a - b;
                        value += d.abs();
                        // subgradient 0 at the kink
                        if d > 0.0 {
                            1.0
                        } else if d < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                Ok((value, g))
            }
            (LossKind::CrossEntropy, Target::Logits(_)) => Err(Error::invalid(
                "targets",
                "cross-entropy needs class labels",
            )),
            (LossKind::L1Logit, Target::Label(_)) => Err(Error::invalid(
                "targets",
                "l1-logit loss needs teacher logits",
            )),
        }
    }

    /// Back-propagates one sample, accumulating into `grads`. Returns the sample loss.
    pub(crate) fn accumulate(
        &self,
        x: &[f64],
        target: Target<'_>,
        loss: LossKind,
        grads: &mut Gradients,
    ) -> Result<f64> {
        ensure_dim(self.input_dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        let acts = self.trace(x);
        let (value, mut delta) = self.output_loss(&acts[acts.len() - 1], target, loss)?;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_in = &acts[l];
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
            }
            grads.biases[l].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
            if l > 0 {
                let mut back = vec![0.0; layer.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
                }
                back.iter_mut()
                    .zip(a_in)
                    .for_each(|(b, a)| *b *= self.activation.derivative_at_output(*a));
                delta = back;
            }
        }
        Ok(value)
    }

    /// Batch-mean loss and its parameter gradients.
    pub fn loss_and_gradients(
        &self,
        inputs: &[Vec<f64>],
        targets: Targets<'_>,
        loss: LossKind,
    ) -> Result<(f64, Gradients)> {
        if inputs.is_empty() {
            return Err(Error::Empty("batch"));
        }
        ensure_dim(inputs.len(), targets.len())?;
        let mut grads = Gradients::zeros_like(self);
        let mut total = 0.0;
        for (i, x) in inputs.iter().enumerate() {
            total += self.accumulate(x, targets.get(i), loss, &mut grads)?;
        }
        let scale = 1.0 / inputs.len() as f64;
        grads.scale(scale);
        Ok((total * scale, grads))
    }

    /// Cross-entropy loss at `(x, label)` and its gradient with respect to `x`.
    pub fn input_gradient(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        ensure_dim(self.input_dim(), x.len())?;
        let acts = self.trace(x);
        let (value, mut delta) =
            self.output_loss(&acts[acts.len() - 1], Target::Label(label), LossKind::CrossEntropy)?;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut back = vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                back.iter_mut().zip(row).for_each(|(b, w)| *b += d * w);
            }
            if l > 0 {
                back.iter_mut()
                    .zip(&acts[l])
                    .for_each(|(b, a)| *b *= self.activation.derivative_at_output(*a));
            }
            delta = back;
        }
        Ok((value, delta))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        ensure_dim(self.parameter_count(), params.len())?;
        self.params_mut().zip(params).for_each(|(p, v)| *p = *v);
        Ok(())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

impl Classifier for DenseNetwork {
    fn input_dim(&self) -> usize {
        DenseNetwork::input_dim(self)
    }
    fn num_classes(&self) -> usize {
        DenseNetwork::num_classes(self)
    }
    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::invalid("layer_sizes", "need at least input and output sizes"));
    }
    if sizes.contains(&0) {
        return Err(Error::invalid("layer_sizes", "layer sizes must be positive"));
    }
    Ok(())
}

/// Softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}
