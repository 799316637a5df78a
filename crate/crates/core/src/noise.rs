//! Continuous i.i.d. noise families used for smoothing.
//!
//! The exponential-power family has density `β/(2αΓ(1/β)) · exp(-|x/α|^β)`;
//! `β = 2` is Gaussian and `β = 1` is Laplace. Cauchy and Pareto have no
//! finite variance, so for them `sigma` is the scale parameter itself.
//! Pareto is centred on its median and symmetrised by a random sign.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::error::{ensure_dim, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseFamily {
    ExpPower,
    Gaussian,
    Laplace,
    Cauchy,
    Pareto,
}

impl NoiseFamily {
    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::ExpPower => "exp-power",
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::Laplace => "laplace",
            NoiseFamily::Cauchy => "cauchy",
            NoiseFamily::Pareto => "pareto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exp-power" | "exponential-power" => Some(NoiseFamily::ExpPower),
            "gaussian" => Some(NoiseFamily::Gaussian),
            "laplace" => Some(NoiseFamily::Laplace),
            "cauchy" => Some(NoiseFamily::Cauchy),
            "pareto" => Some(NoiseFamily::Pareto),
            _ => None,
        }
    }
}

/// Scale that gives an exponential-power variable the standard deviation `sigma`.
pub fn calibrate_alpha(beta: f64, sigma: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    Ok(sigma * (0.5 * (ln_gamma(1.0 / beta) - ln_gamma(3.0 / beta))).exp())
}

/// An i.i.d. noise distribution over `dim` coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    /// Shape: exponent of the exponential-power family, tail index for Pareto.
    pub beta: f64,
    /// Per-coordinate scale of the density.
    pub alpha: f64,
    /// Nominal standard deviation (scale parameter for Cauchy and Pareto).
    pub sigma: f64,
    pub dim: usize,
    log_norm: f64,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Gaussian, 2.0, sigma, sigma, dim)
    }

    /// Laplace with variance `sigma^2`.
    pub fn laplace(sigma: f64, dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Laplace, 1.0, sigma / std::f64::consts::SQRT_2, sigma, dim)
    }

    /// Exponential-power with `alpha` calibrated so the variance is `sigma^2`.
    pub fn exp_power(beta: f64, sigma: f64, dim: usize) -> Result<Self> {
        let alpha = calibrate_alpha(beta, sigma)?;
        Self::build(NoiseFamily::ExpPower, beta, alpha, sigma, dim)
    }

    /// Exponential-power with an explicit scale.
    pub fn exp_power_with_alpha(beta: f64, alpha: f64, dim: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", "must be positive"));
        }
        let sigma = alpha * (0.5 * (ln_gamma(3.0 / beta) - ln_gamma(1.0 / beta))).exp();
        Self::build(NoiseFamily::ExpPower, beta, alpha, sigma, dim)
    }

    pub fn cauchy(scale: f64, dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Cauchy, 1.0, scale, scale, dim)
    }

    /// Symmetrised, median-centred Pareto with tail index `shape`.
    pub fn pareto(shape: f64, scale: f64, dim: usize) -> Result<Self> {
        Self::build(NoiseFamily::Pareto, shape, scale, scale, dim)
    }

    /// Builds a spec from the serialized fields (`family`, `beta`, `sigma`, `dim`).
    pub fn from_parts(family: NoiseFamily, beta: f64, sigma: f64, dim: usize) -> Result<Self> {
        match family {
            NoiseFamily::Gaussian => Self::gaussian(sigma, dim),
            NoiseFamily::Laplace => Self::laplace(sigma, dim),
            NoiseFamily::ExpPower => Self::exp_power(beta, sigma, dim),
            NoiseFamily::Cauchy => Self::cauchy(sigma, dim),
            NoiseFamily::Pareto => Self::pareto(beta, sigma, dim),
        }
    }

    /// Same family and shape at a different scale/dimension.
    pub fn with_sigma(&self, sigma: f64, dim: usize) -> Result<Self> {
        Self::from_parts(self.family, self.beta, sigma, dim)
    }

    fn build(family: NoiseFamily, beta: f64, alpha: f64, sigma: f64, dim: usize) -> Result<Self> {
        for (name, v) in [("beta", beta), ("alpha", alpha), ("sigma", sigma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        let log_norm = match family {
            NoiseFamily::Gaussian => -(alpha * (2.0 * std::f64::consts::PI).sqrt()).ln(),
            NoiseFamily::Laplace => -(2.0 * alpha).ln(),
            NoiseFamily::ExpPower => (beta / (2.0 * alpha)).ln() - ln_gamma(1.0 / beta),
            NoiseFamily::Cauchy => -(std::f64::consts::PI * alpha).ln(),
            // a * x_m^a, the mixture weight 1/2 is applied per branch
            NoiseFamily::Pareto => beta.ln() + beta * alpha.ln(),
        };
        Ok(Self { family, beta, alpha, sigma, dim, log_norm })
    }

    /// Characteristic length used to seed searches.
    pub fn scale(&self) -> f64 {
        self.sigma
    }

    /// Median of the underlying (unshifted) Pareto variable.
    fn pareto_median(&self) -> f64 {
        self.alpha * 2f64.powf(1.0 / self.beta)
    }

    /// Log-density of one coordinate.
    #[inline]
    pub fn log_density_1d(&self, x: f64) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => {
                let z = x / self.alpha;
                self.log_norm - 0.5 * z * z
            }
            NoiseFamily::Laplace => self.log_norm - x.abs() / self.alpha,
            NoiseFamily::ExpPower => self.log_norm - abs_pow(x / self.alpha, self.beta),
            NoiseFamily::Cauchy => {
                let z = x / self.alpha;
                self.log_norm - (z * z).ln_1p()
            }
            NoiseFamily::Pareto => {
                let m = self.pareto_median();
                let lo = self.alpha - m;
                let branch = |y: f64| {
                    if y >= lo {
                        self.log_norm - (self.beta + 1.0) * (y + m).ln()
                    } else {
                        f64::NEG_INFINITY
                    }
                };
                let (a, b) = (branch(x), branch(-x));
                let hi = a.max(b);
                if hi == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                hi + ((a - hi).exp() + (b - hi).exp()).ln() - std::f64::consts::LN_2
            }
        }
    }

    pub fn log_density(&self, v: &[f64]) -> Result<f64> {
        ensure_dim(self.dim, v.len())?;
        Ok(v.iter().map(|x| self.log_density_1d(*x)).sum())
    }

    /// `log μ(eps - shift) - log μ(eps)`; exactly zero for a zero shift.
    pub fn log_ratio(&self, eps: &[f64], shift: &[f64]) -> Result<f64> {
        ensure_dim(self.dim, eps.len())?;
        ensure_dim(self.dim, shift.len())?;
        Ok(eps
            .iter()
            .zip(shift)
            .map(|(e, s)| {
                if *s == 0.0 {
                    0.0
                } else {
                    self.log_density_1d(e - s) - self.log_density_1d(*e)
                }
            })
            .sum())
    }

    /// One scalar draw.
    pub fn sample_1d<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sign = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { -1.0 };
        match self.family {
            NoiseFamily::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.alpha * z
            }
            NoiseFamily::Laplace => {
                let u: f64 = rng.random();
                // Exp(1) by inversion; 1-u lies in (0, 1]
                sign(rng) * self.alpha * -(1.0 - u).ln()
            }
            NoiseFamily::ExpPower => {
                // shape > 0 is guaranteed by construction
                let g: f64 = Gamma::new(1.0 / self.beta, 1.0).expect("valid gamma").sample(rng);
                sign(rng) * self.alpha * g.powf(1.0 / self.beta)
            }
            NoiseFamily::Cauchy => {
                let u: f64 = rng.random();
                self.alpha * (std::f64::consts::PI * (u - 0.5)).tan()
            }
            NoiseFamily::Pareto => {
                let u: f64 = rng.random();
                let p = self.alpha * (1.0 - u).powf(-1.0 / self.beta);
                sign(rng) * (p - self.pareto_median())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| self.sample_1d(rng)).collect()
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = self.sample_1d(rng));
    }

    /// True when `log_ratio` is an affine function of `eps·shift`.
    pub(crate) fn is_gaussian_shape(&self) -> bool {
        matches!(self.family, NoiseFamily::Gaussian)
            || (self.family == NoiseFamily::ExpPower && self.beta == 2.0)
    }

    /// Variance of one coordinate, when finite.
    pub fn variance(&self) -> Option<f64> {
        match self.family {
            NoiseFamily::Cauchy => None,
            NoiseFamily::Pareto => None,
            _ => Some(self.sigma * self.sigma),
        }
    }
}

/// `|x|^p` with fast paths for the shapes that come up in practice.
#[inline]
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 2.0 {
        a * a
    } else if p == 1.0 {
        a
    } else if p == 0.5 {
        a.sqrt()
    } else if p == 3.0 {
        a * a * a
    } else if p == 4.0 {
        let s = a * a;
        s * s
    } else {
        a.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn alpha_calibration_closed_forms() {
        assert!((calibrate_alpha(2.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert!((calibrate_alpha(1.0, 1.0).unwrap() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(calibrate_alpha(0.0, 1.0).is_err());
        assert!(calibrate_alpha(1.0, -1.0).is_err());
    }

    #[test]
    fn standard_normal_at_zero() {
        let s = NoiseSpec::gaussian(1.0, 1).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((s.log_density(&[0.0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn exp_power_two_is_gaussian() {
        let g = NoiseSpec::gaussian(0.7, 1).unwrap();
        let e = NoiseSpec::exp_power(2.0, 0.7, 1).unwrap();
        for i in 0..1000 {
            let x = -6.0 + 12.0 * i as f64 / 999.0;
            let (a, b) = (g.log_density_1d(x), e.log_density_1d(x));
            assert!((a - b).abs() < 1e-10, "{x}: {a} vs {b}");
            assert!((a.exp() - b.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_power_one_is_laplace() {
        let l = NoiseSpec::laplace(1.3, 1).unwrap();
        let e = NoiseSpec::exp_power(1.0, 1.3, 1).unwrap();
        for i in 0..200 {
            let x = -5.0 + 10.0 * i as f64 / 199.0;
            assert!((l.log_density_1d(x) - e.log_density_1d(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_and_separable() {
        let specs = [
            NoiseSpec::gaussian(1.0, 2).unwrap(),
            NoiseSpec::laplace(1.0, 2).unwrap(),
            NoiseSpec::exp_power(0.75, 1.0, 2).unwrap(),
            NoiseSpec::cauchy(1.0, 2).unwrap(),
            NoiseSpec::pareto(3.0, 1.0, 2).unwrap(),
        ];
        for s in &specs {
            let v = [0.4, -1.9];
            let a = s.log_density(&v).unwrap();
            assert!((a - s.log_density(&[-0.4, 1.9]).unwrap()).abs() < 1e-12, "{:?}", s.family);
            let sum = s.log_density_1d(0.4) + s.log_density_1d(-1.9);
            assert!((a - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn log_ratio_contract() {
        let s = NoiseSpec::gaussian(1.0, 1).unwrap();
        for (e, sh) in [(0.3, 1.0), (-1.2, 0.5), (2.0, -0.7)] {
            let r = s.log_ratio(&[e], &[sh]).unwrap();
            assert!((r - (sh * e - sh * sh / 2.0)).abs() < 1e-12);
            let by_def = s.log_density(&[e - sh]).unwrap() - s.log_density(&[e]).unwrap();
            assert!((r - by_def).abs() < 1e-12);
        }
        let l = NoiseSpec::laplace(1.0, 3).unwrap();
        assert_eq!(l.log_ratio(&[0.1, 2.0, -3.0], &[0.0; 3]).unwrap(), 0.0);
        assert!(l.log_ratio(&[0.1], &[0.0; 3]).is_err());
    }

    #[test]
    fn sample_has_spec_dimension() {
        let s = NoiseSpec::exp_power(3.0, 1.0, 3).unwrap();
        assert_eq!(s.sample(&mut rng::seeded(1)).len(), 3);
        assert_eq!(s.sample(&mut rng::seeded(5)), s.sample(&mut rng::seeded(5)));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(NoiseSpec::gaussian(0.0, 1).is_err());
        assert!(NoiseSpec::gaussian(1.0, 0).is_err());
        assert!(NoiseSpec::exp_power(-1.0, 1.0, 1).is_err());
        assert!(NoiseSpec::pareto(2.0, f64::NAN, 1).is_err());
    }
}
