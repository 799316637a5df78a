use rand::Rng;
use rand_distr::StandardNormal;

use crate::classifier::Classifier;
use crate::data::Dataset;
use crate::error::{ensure_dim, Error, Result};
use crate::netcore::DenseNetwork;
use crate::radius::Norm;

#[derive(Clone, Debug, PartialEq)]
pub struct PgdConfig {
    pub norm: Norm,
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    /// Start from a uniform-direction point inside the ball instead of at `x`.
    pub random_start: bool,
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.norm == Norm::L1 {
            return Err(Error::UnsupportedNorm("l1"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be finite and non-negative"));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("step_size", "must be finite and non-negative"));
        }
        Ok(())
    }
}

fn project(x: &[f64], adv: &mut [f64], norm: Norm, eps: f64) {
    match norm {
        Norm::Linf => adv
            .iter_mut()
            .zip(x)
            .for_each(|(a, c)| *a = a.clamp(c - eps, c + eps)),
        _ => {
            let dist = adv.iter().zip(x).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
            if dist > eps {
                let s = eps / dist;
                adv.iter_mut().zip(x).for_each(|(a, c)| *a = c + (*a - c) * s);
            }
        }
    }
}

/// Projected gradient ascent on the cross-entropy of `label`, staying in the
/// `epsilon`-ball around `x`.
pub fn pgd_attack<R: Rng + ?Sized>(model: &DenseNetwork, x: &[f64], label: usize, cfg: &PgdConfig, rng: &mut R) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure_dim(model.input_dim(), x.len())?;
    if cfg.epsilon == 0.0 {
        return Ok(x.to_vec());
    }
    let mut adv = x.to_vec();
    if cfg.random_start {
        let dir: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let scale = cfg.epsilon * rng.random::<f64>() / cfg.norm.of(&dir).max(f64::MIN_POSITIVE);
        adv.iter_mut().zip(&dir).for_each(|(a, d)| *a += scale * d);
        project(x, &mut adv, cfg.norm, cfg.epsilon);
    }
    for _ in 0..cfg.steps {
        let (_, g) = model.input_gradient(&adv, label)?;
        match cfg.norm {
            Norm::Linf => adv
                .iter_mut()
                .zip(&g)
                .filter(|(_, gi)| **gi != 0.0)
                .for_each(|(a, gi)| *a += cfg.step_size * gi.signum()),
            _ => {
                let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if len > 0.0 {
                    adv.iter_mut().zip(&g).for_each(|(a, gi)| *a += cfg.step_size * gi / len);
                }
            }
        }
        project(x, &mut adv, cfg.norm, cfg.epsilon);
    }
    Ok(adv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackRecord {
    pub id: usize,
    pub success: bool,
    pub perturbation_norm: f64,
}

/// Attacks every labelled row; success means the model no longer predicts the label.
pub fn attack_dataset<R: Rng + ?Sized>(model: &DenseNetwork, data: &Dataset, cfg: &PgdConfig, rng: &mut R) -> Result<Vec<AttackRecord>> {
    let labels = data.require_labels()?;
    data.features
        .iter()
        .zip(labels)
        .enumerate()
        .map(|(id, (x, y))| {
            let adv = pgd_attack(model, x, *y, cfg, rng)?;
            let delta: Vec<f64> = adv.iter().zip(x).map(|(a, b)| a - b).collect();
            Ok(AttackRecord {
                id,
                success: model.predict(&adv)? != *y,
                perturbation_norm: cfg.norm.of(&delta),
            })
        })
        .collect()
}
