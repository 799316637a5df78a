//! Particle swarm over unit directions.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{solve_on_probe, Norm, RadiusSolverConfig};
use crate::error::{Error, Result};
use crate::mcbounds::BoundaryProbe;

pub(crate) struct SwarmOutcome {
    /// Best direction, unit in the searched norm.
    pub best: Vec<f64>,
    pub evaluations: usize,
    pub failures: usize,
}

struct Particle {
    position: Vec<f64>,
    velocity: Vec<f64>,
    best_position: Vec<f64>,
    best_cost: f64,
}

fn random_direction<R: Rng + ?Sized>(dim: usize, norm: Norm, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if let Some(u) = norm.normalize(&v) {
            return u;
        }
    }
}

/// Memoised cost `‖λ(δ)δ‖_p` for unit `δ`.
struct Cost<'a> {
    probe: &'a mut BoundaryProbe,
    cfg: &'a RadiusSolverConfig,
    cache: HashMap<Vec<u64>, f64>,
    evaluations: usize,
    failures: usize,
}

impl Cost<'_> {
    fn eval(&mut self, direction: &[f64]) -> Result<f64> {
        let key: Vec<u64> = direction.iter().map(|v| v.to_bits()).collect();
        if let Some(c) = self.cache.get(&key) {
            return Ok(*c);
        }
        let cost = match solve_on_probe(self.probe, direction, self.cfg) {
            Ok(sol) => {
                self.evaluations += sol.evaluations;
                sol.lambda
            }
            Err(Error::BracketNotFound { .. }) => {
                self.failures += 1;
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        self.cache.insert(key, cost);
        Ok(cost)
    }
}

pub(crate) fn search<R: Rng + ?Sized>(
    probe: &mut BoundaryProbe,
    norm: Norm,
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<SwarmOutcome> {
    let dim = probe.spec().dim;
    let mut cost = Cost { probe, cfg, cache: HashMap::new(), evaluations: 0, failures: 0 };

    let mut swarm = Vec::with_capacity(cfg.pso_particles);
    for _ in 0..cfg.pso_particles {
        let position = random_direction(dim, norm, rng);
        let velocity = (0..dim).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c = cost.eval(&position)?;
        swarm.push(Particle { best_position: position.clone(), position, velocity, best_cost: c });
    }
    let mut global = swarm
        .iter()
        .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
        .map(|p| (p.best_position.clone(), p.best_cost))
        .expect("at least two particles");

    for _ in 0..cfg.pso_iters {
        for p in swarm.iter_mut() {
            for j in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                p.velocity[j] = cfg.pso_inertia * p.velocity[j]
                    + cfg.pso_cognitive * r1 * (p.best_position[j] - p.position[j])
                    + cfg.pso_social * r2 * (global.0[j] - p.position[j]);
                p.position[j] += p.velocity[j];
            }
            p.position = match norm.normalize(&p.position) {
                Some(u) => u,
                None => random_direction(dim, norm, rng),
            };
            let c = cost.eval(&p.position)?;
            if c < p.best_cost {
                p.best_cost = c;
                p.best_position = p.position.clone();
            }
        }
        // global best is refreshed once per sweep
        for p in &swarm {
            if p.best_cost < global.1 {
                global = (p.best_position.clone(), p.best_cost);
            }
        }
    }

    if !global.1.is_finite() {
        return Err(Error::SolverFailed);
    }
    Ok(SwarmOutcome { best: global.0, evaluations: cost.evaluations, failures: cost.failures })
}
