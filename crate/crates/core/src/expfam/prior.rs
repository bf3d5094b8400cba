use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{ExpFamilyDensity, MomentOracle, MomentParams, SufficientStatistic};
use crate::{abs2, Error, Real, Result};

/// Priors that are not a single exponential-family member but admit exact
/// posterior moments against a complex Gaussian pseudo-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GenericPrior<T> {
    /// `(1 − ρ) δ(x) + ρ CN(x; 0, v₀)`, ρ being the activity probability.
    BernoulliGaussian { rho: T, v0: T },
    /// `Π_m CN(x_m; 0, α_m)`.
    ZeroMeanGaussianVec { alpha: Vec<T> },
}

/// Posterior mean, variance and second moment `E|x|²` of one entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments<T> {
    pub mean: Complex<T>,
    pub var: T,
    pub second: T,
}

impl<T: Real> GenericPrior<T> {
    pub fn bernoulli_gaussian(rho: T, v0: T) -> Result<Self> {
        if !(rho >= T::zero() && rho <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("{rho} is outside [0, 1]"),
            });
        }
        if !(v0 > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "v0",
                reason: format!("{v0} is not positive"),
            });
        }
        Ok(Self::BernoulliGaussian { rho, v0 })
    }

    pub fn zero_mean_gaussian(alpha: Vec<T>) -> Result<Self> {
        if let Some(a) = alpha.iter().find(|a| !(**a > T::zero())) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{a} is not positive"),
            });
        }
        Ok(Self::ZeroMeanGaussianVec { alpha })
    }

    /// Prior mean and variance of entry `m`.
    pub fn prior_moments(&self, m: usize) -> (Complex<T>, T) {
        match self {
            Self::BernoulliGaussian { rho, v0 } => (Complex::new(T::zero(), T::zero()), *rho * *v0),
            Self::ZeroMeanGaussianVec { alpha } => (Complex::new(T::zero(), T::zero()), alpha[m]),
        }
    }

    /// Exact moments of `p(x_m) · CN(x_m; mu, tau)`, `tau` being a variance.
    pub fn posterior(&self, m: usize, mu: Complex<T>, tau: T) -> Result<PosteriorMoments<T>> {
        match self {
            Self::BernoulliGaussian { rho, v0 } => bernoulli_gaussian_posterior(*rho, *v0, mu, tau),
            Self::ZeroMeanGaussianVec { alpha } => gaussian_posterior(alpha[m], mu, tau),
        }
    }

    /// Moments of entry `m` tilted by an optional complex Gaussian factor
    /// given in natural form. A flat factor (zero precision) leaves the prior.
    pub fn tilted(&self, m: usize, factor: Option<&ExpFamilyDensity<T>>) -> Result<PosteriorMoments<T>> {
        let Some(f) = factor else {
            return Ok(self.prior_posterior(m));
        };
        let prec = f
            .gaussian_precision()
            .filter(|_| f.statistic() == SufficientStatistic::ComplexGaussian)
            .ok_or_else(|| Error::FamilyMismatch {
                left: f.statistic().to_string(),
                right: SufficientStatistic::ComplexGaussian.to_string(),
            })?;
        if prec == T::zero() && f.natural()[0] == T::zero() && f.natural()[1] == T::zero() {
            return Ok(self.prior_posterior(m));
        }
        if prec <= T::zero() {
            return Err(Error::DegenerateCavity(prec.as_f64()));
        }
        let mean = f.complex_precision_mean().expect("complex gaussian") / prec;
        self.posterior(m, mean, prec.recip())
    }

    fn prior_posterior(&self, m: usize) -> PosteriorMoments<T> {
        let (mean, var) = self.prior_moments(m);
        PosteriorMoments {
            mean,
            var,
            second: abs2(mean) + var,
        }
    }
}

fn gaussian_posterior<T: Real>(alpha: T, mu: Complex<T>, tau: T) -> Result<PosteriorMoments<T>> {
    if !(tau > T::zero()) {
        return Err(Error::DegenerateCavity(tau.as_f64()));
    }
    let var = (alpha.recip() + tau.recip()).recip();
    let mean = mu * (var / tau);
    Ok(PosteriorMoments {
        mean,
        var,
        second: abs2(mean) + var,
    })
}

/// Exact moments of `[(1 − ρ) δ(x) + ρ CN(x; 0, v₀)] · CN(x; μ, τ)`.
///
/// With slab posterior `v = (1/v₀ + 1/τ)⁻¹`, `m = vμ/τ` and slab
/// responsibility `π`, the mean is `πm` and `E|x|² = π(|m|² + v)`.
pub fn bernoulli_gaussian_posterior<T: Real>(rho: T, v0: T, mu: Complex<T>, tau: T) -> Result<PosteriorMoments<T>> {
    if !(tau > T::zero()) {
        return Err(Error::DegenerateCavity(tau.as_f64()));
    }
    let zero = PosteriorMoments {
        mean: Complex::new(T::zero(), T::zero()),
        var: T::zero(),
        second: T::zero(),
    };
    if rho <= T::zero() {
        return Ok(zero);
    }
    let v = (v0.recip() + tau.recip()).recip();
    let m = mu * (v / tau);
    let pi = if rho >= T::one() {
        T::one()
    } else {
        // log of ((1−ρ)/ρ) · CN(μ; 0, τ) / CN(μ; 0, v₀ + τ)
        let r2 = abs2(mu);
        let s = ((T::one() - rho) / rho).ln() - r2 / tau + r2 / (v0 + tau) - tau.ln() + (v0 + tau).ln();
        if s > T::zero() {
            let e = (-s).exp();
            e / (T::one() + e)
        } else {
            (T::one() + s.exp()).recip()
        }
    };
    let m2 = abs2(m);
    Ok(PosteriorMoments {
        mean: m * pi,
        var: pi * v + pi * (T::one() - pi) * m2,
        second: pi * (m2 + v),
    })
}

impl<T: Real> MomentOracle<T> for GenericPrior<T> {
    /// Prior moments of the first entry.
    fn moments(&self, stat: SufficientStatistic) -> Result<MomentParams<T>> {
        match stat {
            SufficientStatistic::ComplexGaussian => {
                let (mean, var) = self.prior_moments(0);
                Ok(MomentParams(vec![mean.re, mean.im, abs2(mean) + var]))
            }
            other => Err(Error::FamilyMismatch {
                left: "generic-prior".into(),
                right: other.to_string(),
            }),
        }
    }
}

impl<T: Real> MomentOracle<T> for PosteriorMoments<T> {
    fn moments(&self, stat: SufficientStatistic) -> Result<MomentParams<T>> {
        match stat {
            SufficientStatistic::ComplexGaussian => Ok(MomentParams(vec![self.mean.re, self.mean.im, self.second])),
            other => Err(Error::FamilyMismatch {
                left: "posterior-moments".into(),
                right: other.to_string(),
            }),
        }
    }
}
