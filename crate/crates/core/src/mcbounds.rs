//! Monte Carlo estimators: class votes under noise, exact binomial bounds,
//! and the likelihood-ratio quantiles (`t_A`, `t_B`) and boundary gap `K`
//! that drive the radius search.
//!
//! All likelihood ratios live in log space. `t_A` is the lower
//! `p_A`-quantile of `r(ε) = log μ(ε - v) - log μ(ε)`, `t_B` the threshold
//! whose upper tail holds `p_B` of the mass. `K` evaluates the same ratio on
//! the shifted noise: `K = P(r(ε + v) ≤ t_A) - P(r(ε + v) ≥ t_B)`.

use std::io::Write;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

use crate::classifier::{argmax, Classifier};
use crate::error::{ensure_dim, Error, Result};
use crate::noise::NoiseSpec;
use crate::rng;

/// Per-class vote tallies from noisy evaluations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoteCounts {
    pub counts: Vec<u64>,
    pub n: u64,
}

impl VoteCounts {
    pub fn new(classes: usize) -> Self {
        Self { counts: vec![0; classes], n: 0 }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        let n = counts.iter().sum();
        Self { counts, n }
    }

    pub fn record(&mut self, class: usize) {
        self.counts[class] += 1;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &VoteCounts) {
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        self.n += other.n;
    }

    /// Most-voted class, lowest index on ties.
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.counts.iter().enumerate().skip(1) {
            if *c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    /// Most-voted class other than `winner`, lowest index on ties.
    pub fn runner_up(&self, winner: usize) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, c) in self.counts.iter().enumerate() {
            if i == winner {
                continue;
            }
            if best.is_none_or(|b| *c > self.counts[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn count(&self, class: usize) -> u64 {
        self.counts[class]
    }

    /// `class,count` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "class,count")?;
        for (c, n) in self.counts.iter().enumerate() {
            writeln!(out, "{c},{n}")?;
        }
        Ok(())
    }
}

/// Argmax votes of `classifier(x + ε)` over `n` noise draws.
pub fn estimate_votes<C, R>(classifier: &C, x: &[f64], spec: &NoiseSpec, n: usize, rng: &mut R) -> Result<VoteCounts>
where
    C: Classifier + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("n", "need at least one draw"));
    }
    ensure_dim(classifier.input_dim(), x.len())?;
    ensure_dim(spec.dim, x.len())?;
    let mut votes = VoteCounts::new(classifier.num_classes());
    let mut noisy = vec![0.0; x.len()];
    for _ in 0..n {
        spec.sample_into(rng, &mut noisy);
        noisy.iter_mut().zip(x).for_each(|(e, v)| *e += v);
        let logits = classifier.logits(&noisy)?;
        ensure_dim(votes.counts.len(), logits.len())?;
        votes.record(argmax(&logits));
    }
    Ok(votes)
}

/// [`estimate_votes`] split over `workers` threads; substream `w` of `seed`
/// feeds worker `w`, so the result depends only on `(seed, workers)`.
pub fn estimate_votes_parallel<C>(
    classifier: &C,
    x: &[f64],
    spec: &NoiseSpec,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<VoteCounts>
where
    C: Classifier + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("n", "need at least one draw"));
    }
    let chunks = rng::chunk_lengths(n, workers);
    if chunks.len() == 1 {
        return estimate_votes(classifier, x, spec, n, &mut rng::substream(seed, 0));
    }
    let parts: Vec<Result<VoteCounts>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .iter()
            .enumerate()
            .filter(|(_, len)| **len > 0)
            .map(|(w, &len)| {
                s.spawn(move || estimate_votes(classifier, x, spec, len, &mut rng::substream(seed, w as u64)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("vote worker panicked")).collect()
    });
    let mut total = VoteCounts::new(classifier.num_classes());
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

/// One-sided exact (Clopper–Pearson) binomial bound at confidence `level`.
///
/// The lower bound is the `1 - level` quantile of `Beta(k, n - k + 1)` (0 when
/// `k = 0`); the upper bound is the `level` quantile of `Beta(k + 1, n - k)`
/// (1 when `k = n`).
pub fn clopper_pearson(k: u64, n: u64, level: f64, side: Side) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::invalid("k", format!("need 0 <= k <= n with n > 0, got k={k}, n={n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "confidence level must lie in (0, 1)"));
    }
    let (k, n) = (k as f64, n as f64);
    Ok(match side {
        Side::Lower if k == 0.0 => 0.0,
        Side::Lower => beta_quantile(k, n - k + 1.0, 1.0 - level),
        Side::Upper if k == n => 1.0,
        Side::Upper => beta_quantile(k + 1.0, n - k, level),
    })
}

/// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}

/// Two-sided exact binomial test p-value for `k` successes in `n` fair trials.
pub fn binomial_two_sided_p(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let k = k.max(n - k);
    // P(X >= k) for X ~ Bin(n, 1/2) via the beta identity
    let tail = if k == 0 { 1.0 } else { beta_reg(k as f64, (n - k) as f64 + 1.0, 0.5) };
    (2.0 * tail).min(1.0)
}

/// Confidence-adjusted class probabilities plus the likelihood-ratio thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundEstimates {
    pub pa_lower: f64,
    pub pb_upper: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub level: f64,
    pub n: u64,
}

/// 1-based order-statistic index `ceil(p n)` clamped to `[1, n]`.
fn order_index(p: f64, n: usize) -> usize {
    let raw = (p * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Lower `p`-quantile of `values` (order statistic `ceil(p n)`). Reorders `values`.
pub(crate) fn lower_quantile(values: &mut [f64], p: f64) -> f64 {
    let idx = order_index(p, values.len()) - 1;
    *values.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// Threshold with `ceil(p n)` values at or above it. Reorders `values`.
pub(crate) fn upper_threshold(values: &mut [f64], p: f64) -> f64 {
    let k = order_index(p, values.len());
    let idx = values.len() - k;
    *values.select_nth_unstable_by(idx, f64::total_cmp).1
}

fn validate_bounds(pa: f64, pb: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&pa) {
        return Err(Error::invalid("pa_lower", format!("{pa} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&pb) {
        return Err(Error::invalid("pb_upper", format!("{pb} outside [0, 1]")));
    }
    Ok(())
}

fn validate_shift(spec: &NoiseSpec, shift: &[f64]) -> Result<()> {
    ensure_dim(spec.dim, shift.len())?;
    if shift.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("shift"));
    }
    Ok(())
}

/// Estimates `(t_A, t_B)` for the perturbation `shift` from `n` fresh noise draws.
pub fn estimate_t_bounds<R: Rng + ?Sized>(
    pa_lower: f64,
    pb_upper: f64,
    spec: &NoiseSpec,
    shift: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    validate_bounds(pa_lower, pb_upper)?;
    validate_shift(spec, shift)?;
    if n < 2 {
        return Err(Error::invalid("n", "need at least two samples"));
    }
    let mut eps = vec![0.0; spec.dim];
    let mut ratios: Vec<f64> = (0..n)
        .map(|_| {
            spec.sample_into(rng, &mut eps);
            spec.log_ratio(&eps, shift).expect("dimensions checked")
        })
        .collect();
    let t_a = lower_quantile(&mut ratios, pa_lower);
    let t_b = upper_threshold(&mut ratios, pb_upper);
    Ok((t_a, t_b))
}

/// Boundary gap `K` at `shift` from `n` fresh noise draws. Samples equal to a
/// threshold count toward both events.
pub fn estimate_k<R: Rng + ?Sized>(
    t_a: f64,
    t_b: f64,
    spec: &NoiseSpec,
    shift: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    validate_shift(spec, shift)?;
    if n < 2 {
        return Err(Error::invalid("n", "need at least two samples"));
    }
    let neg: Vec<f64> = shift.iter().map(|v| -v).collect();
    let mut eps = vec![0.0; spec.dim];
    let (mut below, mut above) = (0i64, 0i64);
    for _ in 0..n {
        spec.sample_into(rng, &mut eps);
        let s = -spec.log_ratio(&eps, &neg).expect("dimensions checked");
        below += i64::from(s <= t_a);
        above += i64::from(s >= t_b);
    }
    Ok((below - above) as f64 / n as f64)
}

/// One evaluation of the boundary gap along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapSample {
    pub k: f64,
    pub t_a: f64,
    pub t_b: f64,
}

/// Boundary-gap evaluator on a fixed set of noise draws (common random numbers).
///
/// The same draws estimate the thresholds and the gap, and they are reused for
/// every scale and direction handed to [`BoundaryProbe::gap`], which makes the
/// gap a deterministic function of the perturbation.
#[derive(Clone, Debug)]
pub struct BoundaryProbe {
    spec: NoiseSpec,
    pa: f64,
    pb: f64,
    n: usize,
    samples: Vec<f64>,
    base: Vec<f64>,
    ratios: Vec<f64>,
    shifted: Vec<f64>,
    cached_dir: Vec<f64>,
    dots: Vec<f64>,
}

impl BoundaryProbe {
    pub fn new<R: Rng + ?Sized>(spec: &NoiseSpec, pa_lower: f64, pb_upper: f64, n: usize, rng: &mut R) -> Result<Self> {
        validate_bounds(pa_lower, pb_upper)?;
        if n < 2 {
            return Err(Error::invalid("mc_n", "need at least two samples"));
        }
        let d = spec.dim;
        let mut samples = vec![0.0; n * d];
        for row in samples.chunks_exact_mut(d) {
            spec.sample_into(rng, row);
        }
        let base = samples
            .chunks_exact(d)
            .map(|e| e.iter().map(|x| spec.log_density_1d(*x)).sum())
            .collect();
        Ok(Self {
            spec: spec.clone(),
            pa: pa_lower,
            pb: pb_upper,
            n,
            samples,
            base,
            ratios: vec![0.0; n],
            shifted: vec![0.0; n],
            cached_dir: Vec::new(),
            dots: Vec::new(),
        })
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn sample_count(&self) -> usize {
        self.n
    }

    /// Gap `K` at the perturbation `lambda * direction`.
    pub fn gap(&mut self, direction: &[f64], lambda: f64) -> Result<GapSample> {
        validate_shift(&self.spec, direction)?;
        if !lambda.is_finite() {
            return Err(Error::NonFinite("lambda"));
        }
        let d = self.spec.dim;
        if self.spec.is_gaussian_shape() {
            if self.cached_dir != direction {
                self.cached_dir = direction.to_vec();
                self.dots = self
                    .samples
                    .chunks_exact(d)
                    .map(|e| e.iter().zip(direction).map(|(a, b)| a * b).sum())
                    .collect();
            }
            // log μ(x) = c - κ x², so both ratios are affine in ε·v
            let kappa = match self.spec.family {
                crate::noise::NoiseFamily::Gaussian => 0.5 / (self.spec.alpha * self.spec.alpha),
                _ => 1.0 / (self.spec.alpha * self.spec.alpha),
            };
            let norm_sq: f64 = direction.iter().map(|v| v * v).sum::<f64>() * lambda * lambda;
            for ((r, s), dot) in self.ratios.iter_mut().zip(self.shifted.iter_mut()).zip(&self.dots) {
                let cross = 2.0 * lambda * dot;
                *r = kappa * (cross - norm_sq);
                *s = kappa * (cross + norm_sq);
            }
        } else {
            let spec = &self.spec;
            for (i, e) in self.samples.chunks_exact(d).enumerate() {
                let (mut minus, mut plus) = (0.0, 0.0);
                for (x, u) in e.iter().zip(direction) {
                    let v = lambda * u;
                    minus += spec.log_density_1d(x - v);
                    plus += spec.log_density_1d(x + v);
                }
                self.ratios[i] = minus - self.base[i];
                self.shifted[i] = self.base[i] - plus;
            }
        }
        let t_a = lower_quantile(&mut self.ratios, self.pa);
        let t_b = upper_threshold(&mut self.ratios, self.pb);
        let (mut below, mut above) = (0i64, 0i64);
        for s in &self.shifted {
            below += i64::from(*s <= t_a);
            above += i64::from(*s >= t_b);
        }
        Ok(GapSample { k: (below - above) as f64 / self.n as f64, t_a, t_b })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::FnClassifier;
    use crate::rng::seeded;

    /// P(Beta(a, b) <= x) for integer a, b through the binomial tail identity.
    fn beta_cdf_by_binomial(a: u64, b: u64, x: f64) -> f64 {
        let n = a + b - 1;
        let mut log_c = 0.0f64; // ln C(n, j), built incrementally from j = 0
        let mut total = 0.0;
        for j in 0..=n {
            if j > 0 {
                log_c += ((n - j + 1) as f64).ln() - (j as f64).ln();
            }
            if j >= a {
                total += (log_c + j as f64 * x.ln() + (n - j) as f64 * (1.0 - x).ln()).exp();
            }
        }
        total
    }

    fn bisect_oracle(a: u64, b: u64, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if beta_cdf_by_binomial(a, b, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 37, 0.99, Side::Lower).unwrap(), 0.0);
        assert_eq!(clopper_pearson(37, 37, 0.99, Side::Upper).unwrap(), 1.0);
        let v = clopper_pearson(100, 100, 0.999, Side::Lower).unwrap();
        assert!((v - 0.001f64.powf(0.01)).abs() < 1e-12);
        assert!((v - 0.93325).abs() < 1e-5);
        assert!(clopper_pearson(5, 4, 0.9, Side::Lower).is_err());
        assert!(clopper_pearson(1, 4, 1.0, Side::Lower).is_err());
    }

    #[test]
    fn clopper_pearson_matches_binomial_oracle() {
        let got = clopper_pearson(50, 100, 0.95, Side::Lower).unwrap();
        let want = bisect_oracle(50, 51, 0.05);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        let got = clopper_pearson(3, 40, 0.99, Side::Upper).unwrap();
        let want = bisect_oracle(4, 37, 0.99);
        assert!((got - want).abs() < 1e-10);
    }

    #[test]
    fn votes_constant_and_single() {
        let c = FnClassifier::new(2, 3, |_| vec![0.0, 0.0, 1.0]);
        let spec = NoiseSpec::gaussian(1.0, 2).unwrap();
        let v = estimate_votes(&c, &[0.0, 0.0], &spec, 500, &mut seeded(1)).unwrap();
        assert_eq!(v.counts, vec![0, 0, 500]);
        let one = estimate_votes(&c, &[0.0, 0.0], &spec, 1, &mut seeded(1)).unwrap();
        assert_eq!(one.n, 1);
        assert_eq!(one.counts.iter().filter(|c| **c > 0).count(), 1);
        assert!(estimate_votes(&c, &[0.0], &spec, 5, &mut seeded(1)).is_err());
    }

    #[test]
    fn votes_split_evenly_for_sign_classifier() {
        let c = FnClassifier::new(1, 2, |x: &[f64]| vec![-x[0], x[0]]);
        let spec = NoiseSpec::laplace(1.0, 1).unwrap();
        let n = 100_000u64;
        let v = estimate_votes(&c, &[0.0], &spec, n as usize, &mut seeded(3)).unwrap();
        let sd = (n as f64 * 0.25).sqrt();
        for k in &v.counts {
            assert!((*k as f64 - n as f64 / 2.0).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn parallel_votes_reproducible_per_worker_count() {
        let c = FnClassifier::new(1, 2, |x: &[f64]| vec![-x[0], x[0]]);
        let spec = NoiseSpec::gaussian(1.0, 1).unwrap();
        let a = estimate_votes_parallel(&c, &[0.2], &spec, 1001, 9, 4).unwrap();
        let b = estimate_votes_parallel(&c, &[0.2], &spec, 1001, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n, 1001);
    }

    #[test]
    fn tie_break_and_csv() {
        let v = VoteCounts::from_counts(vec![4, 7, 7, 1]);
        assert_eq!(v.top(), 1);
        assert_eq!(v.runner_up(1), Some(2));
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "class,count\n0,4\n1,7\n2,7\n3,1\n");
    }

    #[test]
    fn zero_shift_thresholds_and_gap() {
        let spec = NoiseSpec::exp_power(1.5, 1.0, 2).unwrap();
        let (ta, tb) = estimate_t_bounds(0.8, 0.1, &spec, &[0.0, 0.0], 100, &mut seeded(2)).unwrap();
        assert_eq!((ta, tb), (0.0, 0.0));
        let k = estimate_k(0.0, 0.0, &spec, &[0.0, 0.0], 100, &mut seeded(2)).unwrap();
        assert_eq!(k, 0.0);
    }

    #[test]
    fn t_a_converges_to_gaussian_quantile() {
        let spec = NoiseSpec::gaussian(1.0, 1).unwrap();
        let (ta, tb) = estimate_t_bounds(0.9, 0.1, &spec, &[1.0], 100_000, &mut seeded(4)).unwrap();
        let expected = normal_quantile(0.9) - 0.5;
        assert!((ta - 0.7816).abs() < 0.05 && (ta - expected).abs() < 0.05);
        // upper tail holding 10% of r = ε - 1/2 starts at Φ⁻¹(0.9) - 1/2 as well
        assert!((tb - expected).abs() < 0.05);
    }

    #[test]
    fn pa_one_gives_max_ratio() {
        let spec = NoiseSpec::gaussian(1.0, 1).unwrap();
        let mut r1 = seeded(8);
        let (ta, _) = estimate_t_bounds(1.0, 0.0, &spec, &[0.7], 50, &mut r1).unwrap();
        let mut r2 = seeded(8);
        let max = (0..50)
            .map(|_| spec.log_ratio(&spec.sample(&mut r2), &[0.7]).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(ta, max);
    }

    #[test]
    fn gap_sign_flip_near_gaussian_boundary() {
        // closed form here: K(λ) = Φ(Φ⁻¹(0.9) - λ) - Φ(Φ⁻¹(0.1) + λ), zero at 1.2816
        let spec = NoiseSpec::gaussian(1.0, 1).unwrap();
        let mut rng = seeded(5);
        let at = |lam: f64, rng: &mut crate::rng::StreamRng| {
            let (ta, tb) = estimate_t_bounds(0.9, 0.1, &spec, &[lam], 20_000, rng).unwrap();
            estimate_k(ta, tb, &spec, &[lam], 20_000, rng).unwrap()
        };
        assert!(at(1.0, &mut rng) > 0.0);
        assert!(at(1.6, &mut rng) < 0.0);
        assert!(at(1e-3, &mut rng) > 0.0);
        assert!(at(1e3, &mut rng) < -0.99);
    }

    #[test]
    fn probe_gap_monotone_on_common_numbers() {
        let spec = NoiseSpec::gaussian(1.0, 3).unwrap();
        let mut probe = BoundaryProbe::new(&spec, 0.8, 0.15, 5000, &mut seeded(6)).unwrap();
        let dir = [0.6, 0.0, 0.8];
        let ks: Vec<f64> = (0..10).map(|i| probe.gap(&dir, 0.2 + 0.3 * i as f64).unwrap().k).collect();
        assert!(ks.windows(2).all(|w| w[1] <= w[0]), "{ks:?}");
    }

    #[test]
    fn probe_fast_path_matches_generic_path() {
        // ExpPower(β=2) takes the affine path, a β slightly off 2 the generic one
        let fast = NoiseSpec::exp_power(2.0, 1.0, 2).unwrap();
        let slow = NoiseSpec::exp_power(2.0 + 1e-12, 1.0, 2).unwrap();
        let mut a = BoundaryProbe::new(&fast, 0.85, 0.1, 3000, &mut seeded(7)).unwrap();
        let mut b = BoundaryProbe::new(&slow, 0.85, 0.1, 3000, &mut seeded(7)).unwrap();
        for lam in [0.1, 0.7, 1.3] {
            let (ga, gb) = (a.gap(&[0.8, -0.6], lam).unwrap(), b.gap(&[0.8, -0.6], lam).unwrap());
            assert!((ga.t_a - gb.t_a).abs() < 1e-6);
            assert!((ga.k - gb.k).abs() <= 2.0 / 3000.0);
        }
    }

    #[test]
    fn binomial_test_values() {
        assert_eq!(binomial_two_sided_p(5, 10), 1.0);
        // P(X >= 9 | n=10) = 11/1024
        assert!((binomial_two_sided_p(9, 10) - 22.0 / 1024.0).abs() < 1e-12);
        assert!((binomial_two_sided_p(1, 10) - 22.0 / 1024.0).abs() < 1e-12);
    }
}
