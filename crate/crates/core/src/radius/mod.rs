//! Certified radius computation.
//!
//! For a direction `δ` the solver finds the scale `λ` at which the boundary
//! gap `K` crosses zero (geometric bracketing, then bisection). A particle
//! swarm searches directions to minimise `‖λδ‖_p`. The Gaussian closed form
//! `σ/2 · (Φ⁻¹(p_A) - Φ⁻¹(p_B))` is kept as a cross-check.
//!
//! Direction search runs on one set of noise draws shared by every particle,
//! so the cost surface is deterministic. The winning boundary points are then
//! re-estimated on a fresh, independent set of draws; the reported radius
//! comes from that second estimate, which keeps the swarm's minimisation from
//! biasing it downward.

mod pso;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mcbounds::{normal_quantile, BoundaryProbe};
use crate::noise::{NoiseFamily, NoiseSpec};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::Linf];

    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "1" | "l1" => Some(Norm::L1),
            "2" | "l2" => Some(Norm::L2),
            "inf" | "linf" | "infinity" => Some(Norm::Linf),
            _ => None,
        }
    }

    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    /// `v` rescaled onto this norm's unit sphere; `None` for the zero vector.
    pub fn normalize(self, v: &[f64]) -> Option<Vec<f64>> {
        let n = self.of(v);
        (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusSolverConfig {
    /// Noise draws per gap evaluation.
    pub mc_n: usize,
    /// Bisection iterations once the boundary is bracketed.
    pub bisect_iters: usize,
    /// Stop bisecting once `|K|` falls to this value.
    pub k_threshold: f64,
    pub bracket_growth: f64,
    pub bracket_steps: usize,
    pub pso_particles: usize,
    pub pso_iters: usize,
    pub pso_inertia: f64,
    pub pso_cognitive: f64,
    pub pso_social: f64,
    pub norm: Norm,
    pub seed: u64,
}

impl Default for RadiusSolverConfig {
    fn default() -> Self {
        Self {
            mc_n: 4000,
            bisect_iters: 25,
            k_threshold: 0.01,
            bracket_growth: 2.0,
            bracket_steps: 60,
            pso_particles: 16,
            pso_iters: 30,
            pso_inertia: 0.729,
            pso_cognitive: 1.49445,
            pso_social: 1.49445,
            norm: Norm::L2,
            seed: 0,
        }
    }
}

impl RadiusSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_n < 2 {
            return Err(Error::invalid("mc_n", "need at least two samples"));
        }
        if self.bisect_iters == 0 {
            return Err(Error::invalid("bisect_iters", "must be positive"));
        }
        if !(self.k_threshold > 0.0) {
            return Err(Error::invalid("k_threshold", "must be positive"));
        }
        if !(self.bracket_growth > 1.0) {
            return Err(Error::invalid("bracket_growth", "must exceed 1"));
        }
        if self.pso_particles < 2 {
            return Err(Error::invalid("pso_particles", "need at least two particles"));
        }
        if self.pso_iters == 0 {
            return Err(Error::invalid("pso_iters", "must be positive"));
        }
        for (name, v) in [
            ("pso_inertia", self.pso_inertia),
            ("pso_cognitive", self.pso_cognitive),
            ("pso_social", self.pso_social),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// Closed-form ℓ2 radius for Gaussian noise; 0 when `p_A <= p_B`, infinite when `p_A = 1`.
pub fn gaussian_radius(pa_lower: f64, pb_upper: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    if !(0.0..=1.0).contains(&pa_lower) || !(0.0..=1.0).contains(&pb_upper) {
        return Err(Error::invalid("bounds", "probabilities must lie in [0, 1]"));
    }
    if pa_lower <= pb_upper {
        return Ok(0.0);
    }
    Ok(0.5 * sigma * (normal_quantile(pa_lower) - normal_quantile(pb_upper)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BisectionOutcome {
    pub lambda: f64,
    pub residual_k: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Final bracket `(inside, outside)`.
    pub bracket: (f64, f64),
}

/// Finds the zero crossing of a decreasing gap function `k(λ)`.
///
/// Grows (or shrinks) geometrically from `start` until `k` changes sign, then
/// bisects until `|k| <= k_threshold` or `bisect_iters` midpoints have been tried.
pub fn bisect_boundary<F>(mut k: F, start: f64, cfg: &RadiusSolverConfig) -> Result<BisectionOutcome>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::invalid("start", "bracket start must be positive"));
    }
    let mut evaluations = 1;
    let k0 = k(start)?;
    let (mut inside, mut outside);
    if k0 > 0.0 {
        inside = start;
        outside = f64::NAN;
        let mut lam = start;
        let mut last = k0;
        for _ in 0..cfg.bracket_steps {
            lam *= cfg.bracket_growth;
            last = k(lam)?;
            evaluations += 1;
            if last <= 0.0 {
                outside = lam;
                break;
            }
            inside = lam;
        }
        if outside.is_nan() {
            return Err(Error::BracketNotFound { steps: cfg.bracket_steps, last_k: last });
        }
    } else {
        outside = start;
        inside = f64::NAN;
        let mut lam = start;
        let mut last = k0;
        for _ in 0..cfg.bracket_steps {
            lam /= cfg.bracket_growth;
            last = k(lam)?;
            evaluations += 1;
            if last > 0.0 {
                inside = lam;
                break;
            }
            outside = lam;
        }
        if inside.is_nan() {
            return Err(Error::BracketNotFound { steps: cfg.bracket_steps, last_k: last });
        }
    }

    let mut lambda = 0.5 * (inside + outside);
    let mut residual = f64::NAN;
    for _ in 0..cfg.bisect_iters {
        lambda = 0.5 * (inside + outside);
        residual = k(lambda)?;
        evaluations += 1;
        if residual.abs() <= cfg.k_threshold {
            break;
        }
        if residual > 0.0 {
            inside = lambda;
        } else {
            outside = lambda;
        }
    }
    Ok(BisectionOutcome {
        lambda,
        residual_k: residual,
        converged: residual.abs() <= cfg.k_threshold,
        evaluations,
        bracket: (inside, outside),
    })
}

/// Boundary scale along a fixed direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSolution {
    pub lambda: f64,
    pub residual_k: f64,
    pub converged: bool,
    pub evaluations: usize,
}

fn check_direction(direction: &[f64], spec: &NoiseSpec) -> Result<()> {
    crate::error::ensure_dim(spec.dim, direction.len())?;
    if direction.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("direction"));
    }
    if direction.iter().all(|v| *v == 0.0) {
        return Err(Error::invalid("direction", "must be nonzero"));
    }
    Ok(())
}

pub(crate) fn solve_on_probe(
    probe: &mut BoundaryProbe,
    direction: &[f64],
    cfg: &RadiusSolverConfig,
) -> Result<ScalarSolution> {
    let start = probe.spec().scale() / Norm::L2.of(direction);
    let out = bisect_boundary(|lam| Ok(probe.gap(direction, lam)?.k), start, cfg)?;
    Ok(ScalarSolution {
        lambda: out.lambda,
        residual_k: out.residual_k,
        converged: out.converged,
        evaluations: out.evaluations,
    })
}

/// Scale `λ` that puts `λδ` on the robustness boundary, estimated from
/// `cfg.mc_n` draws taken from `rng` and reused for every candidate `λ`.
pub fn scalar_optimize<R: Rng + ?Sized>(
    direction: &[f64],
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<ScalarSolution> {
    cfg.validate()?;
    check_direction(direction, spec)?;
    if pa_lower <= pb_upper {
        return Err(Error::BracketNotFound { steps: 0, last_k: pa_lower - pb_upper });
    }
    let mut probe = BoundaryProbe::new(spec, pa_lower, pb_upper, cfg.mc_n, rng)?;
    solve_on_probe(&mut probe, direction, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusResult {
    pub norm: Norm,
    pub radius: f64,
    /// Unit vector in `norm`.
    pub direction: Vec<f64>,
    pub lambda: f64,
    pub residual_k: f64,
    pub converged: bool,
    /// Gap evaluations spent, search and re-estimation combined.
    pub evaluations: usize,
    /// Swarm cost evaluations whose boundary search failed.
    pub failed_particles: usize,
    /// Closed-form radius, attached for Gaussian noise under ℓ2.
    pub closed_form: Option<f64>,
}

impl RadiusResult {
    fn zero(norm: Norm, dim: usize) -> Self {
        let mut direction = vec![0.0; dim];
        direction[0] = 1.0;
        Self {
            norm,
            radius: 0.0,
            direction,
            lambda: 0.0,
            residual_k: 0.0,
            converged: true,
            evaluations: 0,
            failed_particles: 0,
            closed_form: None,
        }
    }
}

fn validate_bounds(pa: f64, pb: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pa) || !(0.0..=1.0).contains(&pb) {
        return Err(Error::invalid("bounds", "probabilities must lie in [0, 1]"));
    }
    Ok(())
}

/// Swarm search over directions followed by re-estimation of the winner.
pub fn direction_optimize<R: Rng + ?Sized>(
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<RadiusResult> {
    cfg.validate()?;
    validate_bounds(pa_lower, pb_upper)?;
    if pa_lower <= pb_upper {
        return Err(Error::BracketNotFound { steps: 0, last_k: pa_lower - pb_upper });
    }
    let mut out = solve_norms(pa_lower, pb_upper, spec, &[cfg.norm], cfg, rng)?;
    Ok(out.remove(0))
}

/// Certified radius in `cfg.norm`; zero when `p_A <= p_B`.
pub fn certified_radius<R: Rng + ?Sized>(
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<RadiusResult> {
    let mut out = certified_radii(pa_lower, pb_upper, spec, &[cfg.norm], cfg, rng)?;
    Ok(out.remove(0))
}

/// Certified radii for several norms at once.
///
/// Every norm's swarm runs on the same draws, and all the boundary points they
/// find are re-estimated together and offered to every norm, so the returned
/// radii obey `R_∞ <= R_2 <= R_1`.
pub fn certified_radii<R: Rng + ?Sized>(
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    norms: &[Norm],
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<Vec<RadiusResult>> {
    cfg.validate()?;
    validate_bounds(pa_lower, pb_upper)?;
    if norms.is_empty() {
        return Ok(Vec::new());
    }
    let mut results = if pa_lower <= pb_upper {
        norms.iter().map(|n| RadiusResult::zero(*n, spec.dim)).collect()
    } else {
        solve_norms(pa_lower, pb_upper, spec, norms, cfg, rng)?
    };
    if spec.family == NoiseFamily::Gaussian {
        let closed = gaussian_radius(pa_lower, pb_upper, spec.sigma)?;
        for r in results.iter_mut().filter(|r| r.norm == Norm::L2) {
            r.closed_form = Some(closed);
        }
    }
    Ok(results)
}

fn solve_norms<R: Rng + ?Sized>(
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    norms: &[Norm],
    cfg: &RadiusSolverConfig,
    rng: &mut R,
) -> Result<Vec<RadiusResult>> {
    let search_seed: u64 = rng.random();
    let refit_seed: u64 = rng.random();
    let probe = BoundaryProbe::new(spec, pa_lower, pb_upper, cfg.mc_n, &mut rng::seeded(search_seed))?;

    let mut evaluations = 0;
    let mut failed = 0;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for (i, norm) in norms.iter().enumerate() {
        let mut swarm_rng = rng::substream(search_seed, i as u64);
        let mut p = probe.clone();
        let swarm = pso::search(&mut p, *norm, cfg, &mut swarm_rng)?;
        evaluations += swarm.evaluations;
        failed += swarm.failures;
        if !candidates.contains(&swarm.best) {
            candidates.push(swarm.best);
        }
    }

    let mut refit = BoundaryProbe::new(spec, pa_lower, pb_upper, cfg.mc_n, &mut rng::seeded(refit_seed))?;
    let mut points = Vec::with_capacity(candidates.len());
    for dir in &candidates {
        match solve_on_probe(&mut refit, dir, cfg) {
            Ok(sol) => {
                evaluations += sol.evaluations;
                let point: Vec<f64> = dir.iter().map(|v| v * sol.lambda).collect();
                points.push((point, sol.residual_k, sol.converged));
            }
            Err(Error::BracketNotFound { .. }) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::SolverFailed);
    }

    Ok(norms
        .iter()
        .map(|norm| {
            let (point, residual_k, converged) = points
                .iter()
                .min_by(|a, b| norm.of(&a.0).total_cmp(&norm.of(&b.0)))
                .expect("at least one boundary point");
            let radius = norm.of(point);
            RadiusResult {
                norm: *norm,
                radius,
                direction: norm.normalize(point).unwrap_or_else(|| point.clone()),
                lambda: radius,
                residual_k: *residual_k,
                converged: *converged,
                evaluations,
                failed_particles: failed,
                closed_form: None,
            }
        })
        .collect())
}
