//! The smoothed classifier: noise-augmented training, abstaining prediction,
//! certification, and certification-as-a-filter (purification).

use std::collections::BTreeMap;

use rand::Rng;

use crate::classifier::Classifier;
use crate::error::{ensure_dim, Error, Result};
use crate::mcbounds::{self, binomial_two_sided_p, clopper_pearson, Side, VoteCounts};
use crate::netcore::{train_with_augmentation, DenseNetwork, Targets, TrainConfig};
use crate::noise::NoiseSpec;
use crate::radius::{certified_radii, Norm, RadiusSolverConfig};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Class(usize),
    Abstain,
}

impl Decision {
    pub fn class(self) -> Option<usize> {
        match self {
            Decision::Class(c) => Some(c),
            Decision::Abstain => None,
        }
    }

    pub fn is_abstain(self) -> bool {
        self == Decision::Abstain
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingConfig {
    pub spec: NoiseSpec,
    /// Votes used to pick the candidate class.
    pub n0: usize,
    /// Votes used to estimate its probability.
    pub n: usize,
    /// Failure probability of the hypothesis test and of the confidence bounds.
    pub alpha: f64,
    /// Abstain when a rival has more than `zeta` times the winner's votes.
    pub zeta: f64,
    /// Abstain when the winner's vote frequency does not exceed `iota`.
    pub iota: f64,
    pub norms: Vec<Norm>,
    pub solver: RadiusSolverConfig,
    /// Separate selection and estimation rounds. When false a single round of
    /// `n` votes serves both purposes.
    pub two_round: bool,
    /// Threads used to collect votes and to certify batches.
    pub workers: usize,
}

impl SmoothingConfig {
    pub fn new(spec: NoiseSpec) -> Self {
        Self {
            spec,
            n0: 100,
            n: 1000,
            alpha: 0.001,
            zeta: 0.5,
            iota: 0.5,
            norms: vec![Norm::L2],
            solver: RadiusSolverConfig::default(),
            two_round: true,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n0 == 0 {
            return Err(Error::invalid("n", "vote counts must be positive"));
        }
        if self.two_round && self.n0 > self.n {
            return Err(Error::invalid("n0", "selection round cannot exceed the estimation round"));
        }
        for (name, v) in [("alpha", self.alpha), ("zeta", self.zeta), ("iota", self.iota)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers", "must be positive"));
        }
        self.solver.validate()
    }
}

/// Result of certifying one input.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOutcome {
    pub decision: Decision,
    pub pa_lower: f64,
    pub pb_upper: f64,
    /// Certified radius per requested norm; empty when abstaining.
    pub radii: BTreeMap<Norm, f64>,
    /// Norms whose radius search did not converge or failed outright.
    pub radius_notes: BTreeMap<Norm, String>,
    pub votes: VoteCounts,
    pub seed: u64,
}

impl CertifyOutcome {
    pub fn radius(&self, norm: Norm) -> Option<f64> {
        self.radii.get(&norm).copied()
    }
}

fn rival_too_strong(votes: &VoteCounts, winner: usize, zeta: f64) -> bool {
    let limit = votes.count(winner) as f64 * zeta;
    votes
        .counts
        .iter()
        .enumerate()
        .any(|(c, k)| c != winner && *k as f64 > limit)
}

/// Abstaining decision from a vote tally: the ζ rule, then a two-sided
/// binomial test of winner against runner-up at level `alpha`.
pub fn decide(votes: &VoteCounts, zeta: f64, alpha: f64) -> Decision {
    let winner = votes.top();
    if rival_too_strong(votes, winner, zeta) {
        return Decision::Abstain;
    }
    let second = votes.runner_up(winner).map_or(0, |c| votes.count(c));
    let top = votes.count(winner);
    if binomial_two_sided_p(top, top + second) <= alpha {
        Decision::Class(winner)
    } else {
        Decision::Abstain
    }
}

fn collect_votes<C: Classifier + ?Sized>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, n: usize, seed: u64) -> Result<VoteCounts> {
    mcbounds::estimate_votes_parallel(classifier, x, &cfg.spec, n, seed, cfg.workers)
}

fn check_input<C: Classifier + ?Sized>(classifier: &C, x: &[f64], cfg: &SmoothingConfig) -> Result<()> {
    ensure_dim(classifier.input_dim(), x.len())?;
    ensure_dim(cfg.spec.dim, x.len())
}

/// Smoothed prediction from `cfg.n` noisy votes.
pub fn smooth_predict<C, R>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, rng: &mut R) -> Result<Decision>
where
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_input(classifier, x, cfg)?;
    let votes = collect_votes(classifier, x, cfg, cfg.n, rng.random())?;
    Ok(decide(&votes, cfg.zeta, cfg.alpha))
}

/// Smoothed prediction together with the winner's vote share (0 on abstain).
pub fn smooth_confidence<C: Classifier + ?Sized>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, seed: u64) -> Result<(Decision, f64)> {
    check_input(classifier, x, cfg)?;
    let votes = collect_votes(classifier, x, cfg, cfg.n, seed)?;
    let decision = decide(&votes, cfg.zeta, cfg.alpha);
    let share = match decision {
        Decision::Class(c) => votes.count(c) as f64 / votes.n as f64,
        Decision::Abstain => 0.0,
    };
    Ok((decision, share))
}

pub fn certify<C, R>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, rng: &mut R) -> Result<CertifyOutcome>
where
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    certify_seeded(classifier, x, cfg, rng.random())
}

/// Certification with votes driven by `seed`. The radius search draws from
/// `cfg.solver.seed` only, so it is a function of the bounds alone.
pub fn certify_seeded<C: Classifier + ?Sized>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, seed: u64) -> Result<CertifyOutcome> {
    let mut out = bound_stage(classifier, x, cfg, seed)?;
    if !out.decision.is_abstain() {
        let (radii, notes) = radius_stage(out.pa_lower, out.pb_upper, cfg)?;
        out.radii = radii;
        out.radius_notes = notes;
    }
    Ok(out)
}

/// Votes, decision and confidence bounds; radii are left empty.
fn bound_stage<C: Classifier + ?Sized>(classifier: &C, x: &[f64], cfg: &SmoothingConfig, seed: u64) -> Result<CertifyOutcome> {
    check_input(classifier, x, cfg)?;
    let selection_seed = rng::substream(seed, 0).random();
    let estimation_seed = rng::substream(seed, 1).random();

    let votes = collect_votes(classifier, x, cfg, cfg.n, estimation_seed)?;
    let candidate = if cfg.two_round {
        collect_votes(classifier, x, cfg, cfg.n0, selection_seed)?.top()
    } else {
        votes.top()
    };

    let outcome = |decision, votes, pa_lower, pb_upper| CertifyOutcome {
        decision,
        pa_lower,
        pb_upper,
        radii: BTreeMap::new(),
        radius_notes: BTreeMap::new(),
        votes,
        seed,
    };

    // the estimation round must confirm the selected class
    if votes.top() != candidate || rival_too_strong(&votes, candidate, cfg.zeta) {
        return Ok(outcome(Decision::Abstain, votes, 0.0, 1.0));
    }
    let n = votes.n;
    let top = votes.count(candidate);
    if top as f64 / n as f64 <= cfg.iota {
        return Ok(outcome(Decision::Abstain, votes, 0.0, 1.0));
    }
    let level = 1.0 - cfg.alpha;
    let pa_lower = clopper_pearson(top, n, level, Side::Lower)?;
    let second = votes.runner_up(candidate).map_or(0, |c| votes.count(c));
    let pb_upper = (1.0 - pa_lower).min(clopper_pearson(second, n, level, Side::Upper)?);
    // a certified outcome also keeps its confidence bound above the frequency threshold
    if pa_lower <= pb_upper || pa_lower < cfg.iota {
        return Ok(outcome(Decision::Abstain, votes, pa_lower, pb_upper));
    }
    Ok(outcome(Decision::Class(candidate), votes, pa_lower, pb_upper))
}

type Radii = (BTreeMap<Norm, f64>, BTreeMap<Norm, String>);

fn radius_stage(pa_lower: f64, pb_upper: f64, cfg: &SmoothingConfig) -> Result<Radii> {
    let mut radii = BTreeMap::new();
    let mut notes = BTreeMap::new();
    let mut radius_rng = rng::seeded(cfg.solver.seed);
    match certified_radii(pa_lower, pb_upper, &cfg.spec, &cfg.norms, &cfg.solver, &mut radius_rng) {
        Ok(results) => {
            for r in results {
                if !r.converged {
                    notes.insert(r.norm, format!("residual K {:.3e} above threshold", r.residual_k));
                }
                radii.insert(r.norm, r.radius);
            }
        }
        Err(e @ (Error::BracketNotFound { .. } | Error::SolverFailed)) => {
            for norm in &cfg.norms {
                radii.insert(*norm, 0.0);
                notes.insert(*norm, e.to_string());
            }
        }
        Err(e) => return Err(e),
    }
    Ok((radii, notes))
}

/// Runs `f` over `items` on up to `workers` threads, keeping input order.
pub(crate) fn parallel_map<T, U, F>(items: &[T], workers: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync,
{
    if workers <= 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let lens = rng::chunk_lengths(items.len(), workers);
    let mut parts = Vec::with_capacity(lens.len());
    std::thread::scope(|scope| {
        let mut start = 0;
        let f = &f;
        let handles: Vec<_> = lens
            .iter()
            .map(|len| {
                let chunk = &items[start..start + len];
                start += len;
                scope.spawn(move || chunk.iter().map(f).collect::<Result<Vec<U>>>())
            })
            .collect();
        for h in handles {
            parts.push(h.join().expect("certification worker panicked"));
        }
    });
    let mut out = Vec::with_capacity(items.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Certifies every input. Seeds are drawn from `rng` in input order and the
/// radius search for each distinct pair of bounds runs once, so the outcomes
/// equal those of [`certify_seeded`] with the same seeds.
pub fn certify_batch<C, R>(classifier: &C, inputs: &[Vec<f64>], cfg: &SmoothingConfig, rng: &mut R) -> Result<Vec<CertifyOutcome>>
where
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let jobs: Vec<(&Vec<f64>, u64)> = inputs.iter().map(|x| (x, rng.random())).collect();
    let mut outcomes = parallel_map(&jobs, cfg.workers, |(x, s)| bound_stage(classifier, x, cfg, *s))?;

    let mut keys: Vec<(u64, u64)> = outcomes
        .iter()
        .filter(|o| !o.decision.is_abstain())
        .map(|o| (o.pa_lower.to_bits(), o.pb_upper.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    let radii = parallel_map(&keys, cfg.workers, |(a, b)| radius_stage(f64::from_bits(*a), f64::from_bits(*b), cfg))?;
    let table: std::collections::HashMap<(u64, u64), Radii> = keys.into_iter().zip(radii).collect();
    for o in outcomes.iter_mut().filter(|o| !o.decision.is_abstain()) {
        let (r, n) = &table[&(o.pa_lower.to_bits(), o.pb_upper.to_bits())];
        o.radii = r.clone();
        o.radius_notes = n.clone();
    }
    Ok(outcomes)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PurifyReport {
    pub certified: Vec<usize>,
    pub abstained: Vec<usize>,
    pub pass_rate: f64,
    pub outcomes: Vec<CertifyOutcome>,
}

/// Keeps only inputs the smoothed classifier certifies.
pub fn purify<C, R>(classifier: &C, inputs: &[Vec<f64>], cfg: &SmoothingConfig, rng: &mut R) -> Result<PurifyReport>
where
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    if inputs.is_empty() {
        return Err(Error::Empty("purification inputs"));
    }
    let outcomes = certify_batch(classifier, inputs, cfg, rng)?;
    let (certified, abstained): (Vec<usize>, Vec<usize>) =
        (0..inputs.len()).partition(|i| !outcomes[*i].decision.is_abstain());
    let pass_rate = certified.len() as f64 / inputs.len() as f64;
    Ok(PurifyReport { certified, abstained, pass_rate, outcomes })
}

/// Trains the base classifier on inputs perturbed with a fresh noise draw on every visit.
pub fn noise_train(
    net: &DenseNetwork,
    inputs: &[Vec<f64>],
    labels: &[usize],
    spec: &NoiseSpec,
    cfg: &TrainConfig,
) -> Result<DenseNetwork> {
    ensure_dim(net.input_dim(), spec.dim)?;
    let (out, _) = train_with_augmentation(net, inputs, Targets::Labels(labels), cfg, |x, rng| {
        x.iter_mut().for_each(|v| *v += spec.sample_1d(rng));
    })?;
    Ok(out)
}
