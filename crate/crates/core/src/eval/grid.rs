use std::collections::BTreeMap;

use rand::Rng;

use super::curve::{certified_accuracy_curve, radius_grid, robust_score};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::netcore::{Activation, DenseNetwork, TrainConfig};
use crate::noise::NoiseSpec;
use crate::radius::Norm;
use crate::rng;
use crate::smoothing::{certify_batch, noise_train, parallel_map, CertifyOutcome, SmoothingConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchConfig {
    pub betas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub arch: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
    /// Template for every cell; its noise spec is replaced per cell and its norms are scored.
    pub smoothing: SmoothingConfig,
    /// Spacing of the radius grid the curves are sampled on.
    pub grid_step: f64,
    /// Cells evaluated concurrently.
    pub workers: usize,
}

/// One (shape, noise level) cell: a noise-trained model certified on the evaluation set.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCell {
    pub beta: f64,
    pub sigma: f64,
    pub outcomes: std::result::Result<Vec<CertifyOutcome>, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    /// Per shape, the robust score of each norm; `None` when every cell of that shape failed.
    pub scores: Vec<(f64, BTreeMap<Norm, Option<f64>>)>,
    /// Shape with the highest score per norm.
    pub best: BTreeMap<Norm, f64>,
    pub cells: Vec<GridCell>,
    pub r_max: f64,
}

impl GridSearchResult {
    pub fn failures(&self) -> impl Iterator<Item = (f64, f64, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.outcomes.as_ref().err().map(|e| (c.beta, c.sigma, e.as_str())))
    }
}

/// Scores each exponential-power shape by the robust score over the noise
/// levels. For every (shape, level) cell a fresh model is noise-trained on
/// `train` and certified on `eval`. A failing cell is recorded and left out
/// of its shape's score.
pub fn noise_grid_search<R: Rng + ?Sized>(
    cfg: &GridSearchConfig,
    train: &Dataset,
    eval: &Dataset,
    rng: &mut R,
) -> Result<GridSearchResult> {
    if cfg.betas.is_empty() || cfg.sigmas.is_empty() {
        return Err(Error::Empty("noise grid"));
    }
    if cfg.smoothing.norms.is_empty() {
        return Err(Error::Empty("norm list"));
    }
    if !(cfg.grid_step > 0.0) || cfg.workers == 0 {
        return Err(Error::invalid("grid_step", "grid step and worker count must be positive"));
    }
    cfg.train.validate()?;
    cfg.smoothing.validate()?;
    let train_labels = train.require_labels()?;
    let eval_labels = eval.require_labels()?;
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Empty("grid search dataset"));
    }

    let master: u64 = rng.random();
    let jobs: Vec<(usize, f64, f64)> = cfg
        .betas
        .iter()
        .flat_map(|b| cfg.sigmas.iter().map(move |s| (*b, *s)))
        .enumerate()
        .map(|(i, (b, s))| (i, b, s))
        .collect();
    let cells = parallel_map(&jobs, cfg.workers, |&(i, beta, sigma)| {
        let outcomes = run_cell(cfg, train, train_labels, eval, beta, sigma, rng::substream(master, i as u64).random())
            .map_err(|e| e.to_string());
        Ok(GridCell { beta, sigma, outcomes })
    })?;

    let max_radius = cells
        .iter()
        .filter_map(|c| c.outcomes.as_ref().ok())
        .flatten()
        .flat_map(|o| o.radii.values().copied())
        .fold(0.0, f64::max);
    let r_max = max_radius + cfg.grid_step;
    let grid = radius_grid(max_radius, cfg.grid_step)?;

    let mut scores = Vec::with_capacity(cfg.betas.len());
    for &beta in &cfg.betas {
        let mut per_norm = BTreeMap::new();
        for &norm in &cfg.smoothing.norms {
            let curves = cells
                .iter()
                .filter(|c| c.beta.to_bits() == beta.to_bits())
                .filter_map(|c| c.outcomes.as_ref().ok().map(|o| (c.sigma, o)))
                .map(|(sigma, outs)| {
                    let labelled: Vec<_> = outs.iter().cloned().zip(eval_labels.iter().copied()).collect();
                    certified_accuracy_curve(&labelled, &grid, norm, sigma)
                })
                .collect::<Result<Vec<_>>>()?;
            let score = if curves.is_empty() { None } else { Some(robust_score(&curves, r_max)?) };
            per_norm.insert(norm, score);
        }
        scores.push((beta, per_norm));
    }

    let mut best = BTreeMap::new();
    for &norm in &cfg.smoothing.norms {
        let mut top: Option<(f64, f64)> = None;
        for (beta, per_norm) in &scores {
            if let Some(s) = per_norm[&norm] {
                if top.is_none_or(|(_, t)| s > t) {
                    top = Some((*beta, s));
                }
            }
        }
        if let Some((beta, _)) = top {
            best.insert(norm, beta);
        }
    }
    Ok(GridSearchResult { scores, best, cells, r_max })
}

fn run_cell(
    cfg: &GridSearchConfig,
    train: &Dataset,
    train_labels: &[usize],
    eval: &Dataset,
    beta: f64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<CertifyOutcome>> {
    let spec = NoiseSpec::exp_power(beta, sigma, train.dim())?;
    let mut cell_rng = rng::seeded(seed);
    let net = DenseNetwork::new(&cfg.arch, cfg.activation, cell_rng.random())?;
    let train_cfg = TrainConfig { seed: cell_rng.random(), ..cfg.train.clone() };
    let model = noise_train(&net, &train.features, train_labels, &spec, &train_cfg)?;
    let smoothing = SmoothingConfig { spec, ..cfg.smoothing.clone() };
    certify_batch(&model, &eval.features, &smoothing, &mut cell_rng)
}
