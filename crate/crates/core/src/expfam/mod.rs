//! Exponential-family algebra.
//!
//! Every density is stored through its natural parameters `η` against a
//! fixed sufficient statistic `t(x)`, i.e. `p(x) ∝ exp(ηᵀ t(x))`. Products and
//! quotients act on `η` directly and are allowed to leave the natural
//! parameter space: a quotient with negative Gaussian precision is a valid
//! value of the unnormalized family, and normalizability is only checked when
//! moments or the log-partition are requested.
//!
//! Parameterizations:
//!
//! | family            | `t(x)`                   | `η`                                   |
//! |-------------------|--------------------------|---------------------------------------|
//! | `RealGaussian`    | `[x, x²]`                | `[μ/σ², −1/(2σ²)]`                    |
//! | `ComplexGaussian` | `[Re x, Im x, |x|²]`     | `[2 Re μ/σ², 2 Im μ/σ², −1/σ²]`       |
//! | `Gamma`           | `[ln x, x]`              | `[shape − 1, −rate]`                  |
//! | `Categorical(k)`  | indicators `[x = j]`     | unnormalized log-probabilities        |
//! | `PointMass`       | `x`                      | `[location]` (not a natural parameter) |
//!
//! The complex Gaussian is circularly symmetric with density
//! `(πσ²)⁻¹ exp(−|x − μ|²/σ²)`, σ² being the total complex variance.

mod prior;
pub(crate) mod special;

pub use prior::{bernoulli_gaussian_posterior, GenericPrior, PosteriorMoments};

use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{abs2, log_sum_exp, Error, Real, Result};

/// Sufficient statistic of a family; fixes the meaning of `η` and `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SufficientStatistic {
    RealGaussian,
    ComplexGaussian,
    Gamma,
    Categorical(usize),
    PointMass,
}

impl SufficientStatistic {
    /// Dimension of `t(x)`.
    pub fn dim(&self) -> usize {
        match self {
            Self::RealGaussian => 2,
            Self::ComplexGaussian => 3,
            Self::Gamma => 2,
            Self::Categorical(k) => *k,
            Self::PointMass => 1,
        }
    }
}

impl fmt::Display for SufficientStatistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RealGaussian => write!(f, "real-gaussian"),
            Self::ComplexGaussian => write!(f, "complex-gaussian"),
            Self::Gamma => write!(f, "gamma"),
            Self::Categorical(k) => write!(f, "categorical({k})"),
            Self::PointMass => write!(f, "point-mass"),
        }
    }
}

/// A point of a variable's domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<T> {
    Real(T),
    Complex(Complex<T>),
    Index(usize),
}

/// Moment parameters `θ = E[t(x)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentParams<T>(pub Vec<T>);

/// Anything that can report `E[t(x)]` for a requested statistic.
///
/// This is the source side of an m-projection.
pub trait MomentOracle<T: Real> {
    fn moments(&self, stat: SufficientStatistic) -> Result<MomentParams<T>>;
}

/// A (possibly unnormalized, possibly non-normalizable) member of an
/// exponential family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFamilyDensity<T> {
    stat: SufficientStatistic,
    eta: Vec<T>,
}

fn mismatch(a: SufficientStatistic, b: SufficientStatistic) -> Error {
    Error::FamilyMismatch {
        left: a.to_string(),
        right: b.to_string(),
    }
}

fn degenerate<T: Real>(moment: &'static str, value: T) -> Error {
    Error::DegenerateProjection {
        moment,
        value: value.as_f64(),
    }
}

impl<T: Real> ExpFamilyDensity<T> {
    /// Builds a member from raw natural parameters.
    pub fn from_natural(stat: SufficientStatistic, eta: Vec<T>) -> Result<Self> {
        if eta.len() != stat.dim() {
            return Err(Error::Dimension(format!(
                "{stat} expects {} natural parameters, got {}",
                stat.dim(),
                eta.len()
            )));
        }
        Ok(Self { stat, eta })
    }

    /// The flat member `η = 0` (uniform for categoricals, non-normalizable otherwise).
    pub fn flat(stat: SufficientStatistic) -> Self {
        Self {
            stat,
            eta: vec![T::zero(); stat.dim()],
        }
    }

    pub fn real_gaussian(mean: T, var: T) -> Self {
        let prec = var.recip();
        Self {
            stat: SufficientStatistic::RealGaussian,
            eta: vec![mean * prec, -prec / T::lit(2.0)],
        }
    }

    /// `CN(x; mean, var)`.
    pub fn complex_gaussian(mean: Complex<T>, var: T) -> Self {
        let prec = var.recip();
        let two = T::lit(2.0);
        Self {
            stat: SufficientStatistic::ComplexGaussian,
            eta: vec![two * mean.re * prec, two * mean.im * prec, -prec],
        }
    }

    /// Complex Gaussian from precision and precision-weighted mean; `prec` may be ≤ 0.
    pub fn complex_gaussian_natural(prec_mean: Complex<T>, prec: T) -> Self {
        let two = T::lit(2.0);
        Self {
            stat: SufficientStatistic::ComplexGaussian,
            eta: vec![two * prec_mean.re, two * prec_mean.im, -prec],
        }
    }

    pub fn gamma(shape: T, rate: T) -> Self {
        Self {
            stat: SufficientStatistic::Gamma,
            eta: vec![shape - T::one(), -rate],
        }
    }

    /// Categorical from (not necessarily normalized) non-negative weights.
    pub fn categorical(weights: &[T]) -> Self {
        Self {
            stat: SufficientStatistic::Categorical(weights.len()),
            eta: weights.iter().map(|w| w.ln()).collect(),
        }
    }

    pub fn point_mass(location: T) -> Self {
        Self {
            stat: SufficientStatistic::PointMass,
            eta: vec![location],
        }
    }

    pub fn statistic(&self) -> SufficientStatistic {
        self.stat
    }

    pub fn natural(&self) -> &[T] {
        &self.eta
    }

    /// True iff `η` lies in the natural parameter space.
    pub fn is_normalizable(&self) -> bool {
        if self.eta.iter().any(|v| v.is_nan()) {
            return false;
        }
        match self.stat {
            SufficientStatistic::RealGaussian => self.eta[1] < T::zero() && self.eta[0].is_finite(),
            SufficientStatistic::ComplexGaussian => {
                self.eta[2] < T::zero() && self.eta[0].is_finite() && self.eta[1].is_finite()
            }
            SufficientStatistic::Gamma => self.eta[0] > -T::one() && self.eta[1] < T::zero(),
            SufficientStatistic::Categorical(_) => {
                self.eta.iter().any(|v| v.is_finite()) && self.eta.iter().all(|v| *v < T::infinity())
            }
            SufficientStatistic::PointMass => self.eta[0].is_finite(),
        }
    }

    /// Product in the unnormalized family.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.stat != other.stat {
            return Err(mismatch(self.stat, other.stat));
        }
        if self.stat == SufficientStatistic::PointMass {
            return self.point_mass_combine(other);
        }
        Ok(Self {
            stat: self.stat,
            eta: self.eta.iter().zip(&other.eta).map(|(a, b)| *a + *b).collect(),
        })
    }

    /// Quotient in the unnormalized family. Never clamps.
    pub fn divide(&self, other: &Self) -> Result<Self> {
        if self.stat != other.stat {
            return Err(mismatch(self.stat, other.stat));
        }
        match self.stat {
            SufficientStatistic::PointMass => self.point_mass_combine(other),
            SufficientStatistic::Categorical(_) => {
                if let Some(index) = other.eta.iter().position(|v| *v == T::neg_infinity()) {
                    return Err(Error::ZeroDivision { index });
                }
                Ok(Self {
                    stat: self.stat,
                    eta: self.eta.iter().zip(&other.eta).map(|(a, b)| *a - *b).collect(),
                })
            }
            _ => Ok(Self {
                stat: self.stat,
                eta: self.eta.iter().zip(&other.eta).map(|(a, b)| *a - *b).collect(),
            }),
        }
    }

    fn point_mass_combine(&self, other: &Self) -> Result<Self> {
        if self.eta[0] == other.eta[0] {
            Ok(self.clone())
        } else {
            Err(Error::InvalidParameter {
                name: "location",
                reason: format!("point masses at {} and {} do not combine", self.eta[0], other.eta[0]),
            })
        }
    }

    /// Raises to a real power (scales `η`); used for damping and tempering.
    pub fn scale(&self, k: T) -> Self {
        Self {
            stat: self.stat,
            eta: self.eta.iter().map(|v| *v * k).collect(),
        }
    }

    /// `(1 − κ)·self + κ·other` on natural parameters.
    pub fn damp_towards(&self, proposed: &Self, kappa: T) -> Result<Self> {
        if self.stat != proposed.stat {
            return Err(mismatch(self.stat, proposed.stat));
        }
        if kappa == T::one() {
            return Ok(proposed.clone());
        }
        let keep = T::one() - kappa;
        Ok(Self {
            stat: self.stat,
            eta: self
                .eta
                .iter()
                .zip(&proposed.eta)
                .map(|(o, p)| keep * *o + kappa * *p)
                .collect(),
        })
    }

    /// Mean-parameter map `θ = ∇Φ(η) = E[t(x)]`.
    pub fn to_moments(&self) -> Result<MomentParams<T>> {
        if !self.is_normalizable() {
            return Err(Error::NonNormalizable);
        }
        let e = &self.eta;
        let two = T::lit(2.0);
        let theta = match self.stat {
            SufficientStatistic::RealGaussian => {
                let var = -(two * e[1]).recip();
                let mean = e[0] * var;
                vec![mean, mean * mean + var]
            }
            SufficientStatistic::ComplexGaussian => {
                let var = -e[2].recip();
                let mean = Complex::new(e[0], e[1]) * (var / two);
                vec![mean.re, mean.im, abs2(mean) + var]
            }
            SufficientStatistic::Gamma => {
                let shape = e[0] + T::one();
                let rate = -e[1];
                vec![special::digamma(shape) - rate.ln(), shape / rate]
            }
            SufficientStatistic::Categorical(_) => {
                let lz = log_sum_exp(e);
                e.iter().map(|v| (*v - lz).exp()).collect()
            }
            SufficientStatistic::PointMass => vec![e[0]],
        };
        Ok(MomentParams(theta))
    }

    /// Inverse mean-parameter map `η = ψ(θ)`.
    pub fn from_moments(stat: SufficientStatistic, theta: &MomentParams<T>) -> Result<Self> {
        let t = &theta.0;
        if t.len() != stat.dim() {
            return Err(Error::Dimension(format!(
                "{stat} expects {} moments, got {}",
                stat.dim(),
                t.len()
            )));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMoments(format!("non-finite moments for {stat}")));
        }
        match stat {
            SufficientStatistic::RealGaussian => {
                let var = t[1] - t[0] * t[0];
                if var <= T::zero() {
                    return Err(degenerate("variance", var));
                }
                Ok(Self::real_gaussian(t[0], var))
            }
            SufficientStatistic::ComplexGaussian => {
                let mean = Complex::new(t[0], t[1]);
                let var = t[2] - abs2(mean);
                if var <= T::zero() {
                    return Err(degenerate("variance", var));
                }
                Ok(Self::complex_gaussian(mean, var))
            }
            SufficientStatistic::Gamma => {
                if t[1] <= T::zero() {
                    return Err(degenerate("mean", t[1]));
                }
                let gap = t[1].ln() - t[0];
                if gap <= T::zero() {
                    return Err(degenerate("log-mean gap", gap));
                }
                let shape = special::gamma_shape_from_log_gap(gap);
                Ok(Self::gamma(shape, shape / t[1]))
            }
            SufficientStatistic::Categorical(_) => {
                if let Some(v) = t.iter().find(|v| **v < T::zero()) {
                    return Err(degenerate("probability", *v));
                }
                let total: T = t.iter().copied().sum();
                if total <= T::zero() {
                    return Err(degenerate("total mass", total));
                }
                Ok(Self::categorical(t))
            }
            SufficientStatistic::PointMass => Ok(Self::point_mass(t[0])),
        }
    }

    /// Log-partition `Φ(η)` with respect to the family's base measure
    /// (Lebesgue for the continuous families, counting for categoricals).
    pub fn log_partition(&self) -> Result<T> {
        if !self.is_normalizable() {
            return Err(Error::NonNormalizable);
        }
        let e = &self.eta;
        let pi = T::PI();
        let four = T::lit(4.0);
        Ok(match self.stat {
            SufficientStatistic::RealGaussian => -e[0] * e[0] / (four * e[1]) + (T::lit(0.5)) * (-pi / e[1]).ln(),
            SufficientStatistic::ComplexGaussian => -(e[0] * e[0] + e[1] * e[1]) / (four * e[2]) + (-pi / e[2]).ln(),
            SufficientStatistic::Gamma => {
                let shape = e[0] + T::one();
                special::ln_gamma(shape) - shape * (-e[1]).ln()
            }
            SufficientStatistic::Categorical(_) => log_sum_exp(e),
            SufficientStatistic::PointMass => T::zero(),
        })
    }

    /// `ηᵀ t(x)`, the unnormalized log-density at `x`.
    pub fn log_unnormalized(&self, x: Value<T>) -> Result<T> {
        let e = &self.eta;
        match (self.stat, x) {
            (SufficientStatistic::RealGaussian, Value::Real(v)) => Ok(e[0] * v + e[1] * v * v),
            (SufficientStatistic::ComplexGaussian, Value::Complex(z)) => Ok(e[0] * z.re + e[1] * z.im + e[2] * abs2(z)),
            (SufficientStatistic::Gamma, Value::Real(v)) if v > T::zero() => Ok(e[0] * v.ln() + e[1] * v),
            (SufficientStatistic::Gamma, Value::Real(_)) => Ok(T::neg_infinity()),
            (SufficientStatistic::Categorical(k), Value::Index(i)) if i < k => Ok(e[i]),
            (SufficientStatistic::PointMass, Value::Real(v)) => {
                Ok(if v == e[0] { T::zero() } else { T::neg_infinity() })
            }
            (stat, x) => Err(Error::InvalidParameter {
                name: "x",
                reason: format!("{x:?} is not in the domain of {stat}"),
            }),
        }
    }

    /// Normalized log-density at `x`.
    pub fn log_density(&self, x: Value<T>) -> Result<T> {
        Ok(self.log_unnormalized(x)? - self.log_partition()?)
    }

    /// `KL(self ‖ other)` for two normalizable members of the same family.
    pub fn kl(&self, other: &Self) -> Result<T> {
        if self.stat != other.stat {
            return Err(mismatch(self.stat, other.stat));
        }
        match self.stat {
            SufficientStatistic::Categorical(_) => {
                let p = self.to_moments()?.0;
                let q = other.to_moments()?.0;
                Ok(p.iter()
                    .zip(&q)
                    .map(|(a, b)| {
                        if *a <= T::zero() {
                            T::zero()
                        } else if *b <= T::zero() {
                            T::infinity()
                        } else {
                            *a * (*a / *b).ln()
                        }
                    })
                    .sum())
            }
            SufficientStatistic::PointMass => Ok(if self.eta[0] == other.eta[0] {
                T::zero()
            } else {
                T::infinity()
            }),
            _ => {
                let theta = self.to_moments()?.0;
                let cross: T = other
                    .eta
                    .iter()
                    .zip(&self.eta)
                    .zip(&theta)
                    .map(|((q, p), t)| (*q - *p) * *t)
                    .sum();
                Ok(other.log_partition()? - self.log_partition()? - cross)
            }
        }
    }

    /// Mean and variance of a normalizable complex Gaussian.
    pub fn complex_mean_var(&self) -> Result<(Complex<T>, T)> {
        if self.stat != SufficientStatistic::ComplexGaussian {
            return Err(mismatch(self.stat, SufficientStatistic::ComplexGaussian));
        }
        if !self.is_normalizable() {
            return Err(Error::NonNormalizable);
        }
        let var = -self.eta[2].recip();
        let mean = Complex::new(self.eta[0], self.eta[1]) * (var / T::lit(2.0));
        Ok((mean, var))
    }

    /// Precision `1/σ²` of a (real or complex) Gaussian member; may be ≤ 0.
    pub fn gaussian_precision(&self) -> Option<T> {
        match self.stat {
            SufficientStatistic::RealGaussian => Some(-T::lit(2.0) * self.eta[1]),
            SufficientStatistic::ComplexGaussian => Some(-self.eta[2]),
            _ => None,
        }
    }

    /// Precision-weighted mean of a complex Gaussian member (defined for any precision).
    pub fn complex_precision_mean(&self) -> Option<Complex<T>> {
        (self.stat == SufficientStatistic::ComplexGaussian)
            .then(|| Complex::new(self.eta[0], self.eta[1]) / T::lit(2.0))
    }

    /// Normalized categorical probabilities.
    pub fn probabilities(&self) -> Result<Vec<T>> {
        match self.stat {
            SufficientStatistic::Categorical(_) => Ok(self.to_moments()?.0),
            other => Err(mismatch(other, SufficientStatistic::Categorical(self.eta.len()))),
        }
    }

    /// Mode of a normalizable member (location for point masses).
    pub fn mode(&self) -> Result<Value<T>> {
        if !self.is_normalizable() {
            return Err(Error::NonNormalizable);
        }
        Ok(match self.stat {
            SufficientStatistic::RealGaussian => Value::Real(-self.eta[0] / (T::lit(2.0) * self.eta[1])),
            SufficientStatistic::ComplexGaussian => Value::Complex(self.complex_mean_var()?.0),
            SufficientStatistic::Gamma => {
                let shape = self.eta[0] + T::one();
                let rate = -self.eta[1];
                Value::Real(((shape - T::one()) / rate).max(T::zero()))
            }
            SufficientStatistic::Categorical(_) => {
                let (i, _) =
                    self.eta.iter().enumerate().fold(
                        (0, T::neg_infinity()),
                        |best, (i, v)| if *v > best.1 { (i, *v) } else { best },
                    );
                Value::Index(i)
            }
            SufficientStatistic::PointMass => Value::Real(self.eta[0]),
        })
    }
}

impl<T: Real> MomentOracle<T> for ExpFamilyDensity<T> {
    fn moments(&self, stat: SufficientStatistic) -> Result<MomentParams<T>> {
        if stat != self.stat {
            return Err(mismatch(self.stat, stat));
        }
        self.to_moments()
    }
}

/// m-projection: the member of `target` minimizing `KL(source ‖ ·)`, found
/// by matching `E[t(x)]`.
pub fn project<T: Real, S: MomentOracle<T> + ?Sized>(
    target: SufficientStatistic,
    source: &S,
) -> Result<ExpFamilyDensity<T>> {
    let theta = source.moments(target)?;
    ExpFamilyDensity::from_moments(target, &theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type D = ExpFamilyDensity<f64>;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn multiply_complex_gaussians() {
        let p = D::complex_gaussian(Complex::new(1.0, 0.0), 1.0)
            .multiply(&D::complex_gaussian(Complex::new(3.0, 0.0), 1.0))
            .unwrap();
        let (m, v) = p.complex_mean_var().unwrap();
        assert!(close(m.re, 2.0, 1e-14) && m.im.abs() < 1e-14);
        assert!(close(v, 0.5, 1e-14));

        let p = D::complex_gaussian(Complex::new(0.0, 0.0), 1.0)
            .multiply(&D::complex_gaussian(Complex::new(0.0, 0.0), 1.0))
            .unwrap();
        let (m, v) = p.complex_mean_var().unwrap();
        assert_eq!(m, Complex::new(0.0, 0.0));
        assert!(close(v, 0.5, 1e-14));
    }

    #[test]
    fn multiply_by_uniform_categorical_is_identity() {
        let p = D::categorical(&[0.6, 0.4])
            .multiply(&D::categorical(&[0.5, 0.5]))
            .unwrap()
            .probabilities()
            .unwrap();
        assert!(close(p[0], 0.6, 1e-14) && close(p[1], 0.4, 1e-14));
    }

    #[test]
    fn divide_examples() {
        let q = D::complex_gaussian(Complex::new(2.0, 0.0), 0.5)
            .divide(&D::complex_gaussian(Complex::new(3.0, 0.0), 1.0))
            .unwrap();
        let (m, v) = q.complex_mean_var().unwrap();
        assert!(close(m.re, 1.0, 1e-14) && close(v, 1.0, 1e-14));

        let d = D::gamma(2.5, 1.5);
        let flat = d.divide(&d).unwrap();
        assert!(flat.natural().iter().all(|v| *v == 0.0));
        assert!(!flat.is_normalizable());

        let neg = D::complex_gaussian(Complex::new(0.0, 0.0), 1.0)
            .divide(&D::complex_gaussian(Complex::new(0.0, 0.0), 0.5))
            .unwrap();
        assert!(close(neg.gaussian_precision().unwrap(), -1.0, 1e-14));
        assert!(!neg.is_normalizable());
        assert_eq!(neg.to_moments(), Err(Error::NonNormalizable));
    }

    #[test]
    fn mismatched_families_and_zero_division() {
        let a = D::gamma(2.0, 1.0);
        let b = D::real_gaussian(0.0, 1.0);
        assert!(matches!(a.multiply(&b), Err(Error::FamilyMismatch { .. })));
        assert!(matches!(a.divide(&b), Err(Error::FamilyMismatch { .. })));
        let z = D::categorical(&[0.5, 0.0]);
        assert_eq!(
            D::categorical(&[0.5, 0.5]).divide(&z),
            Err(Error::ZeroDivision { index: 1 })
        );
    }

    #[test]
    fn moment_examples() {
        let t = D::complex_gaussian(Complex::new(0.0, 0.0), 1.0).to_moments().unwrap();
        assert_eq!(t.0, vec![0.0, 0.0, 1.0]);
        let g = D::gamma(2.0, 1.0).to_moments().unwrap();
        assert!(close(g.0[1], 2.0, 1e-15));
        let c = D::from_moments(SufficientStatistic::ComplexGaussian, &MomentParams(vec![1.0, 0.0, 2.0])).unwrap();
        let (m, v) = c.complex_mean_var().unwrap();
        assert!(close(m.re, 1.0, 1e-15) && m.im == 0.0 && close(v, 1.0, 1e-15));
    }

    #[test]
    fn from_moments_rejects_nonpositive_variance() {
        let err =
            D::from_moments(SufficientStatistic::ComplexGaussian, &MomentParams(vec![1.0, 0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateProjection { moment: "variance", .. }));
        assert!(D::from_moments(SufficientStatistic::Gamma, &MomentParams(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn log_partition_examples() {
        let flat = D::flat(SufficientStatistic::Categorical(4));
        assert!(close(flat.log_partition().unwrap(), 4f64.ln(), 1e-15));
        let cn = D::complex_gaussian(Complex::new(0.0, 0.0), 1.0);
        let at_zero = cn.log_density(Value::Complex(Complex::new(0.0, 0.0))).unwrap();
        assert!(close(at_zero.exp(), std::f64::consts::FRAC_1_PI, 1e-14));
        assert!(D::flat(SufficientStatistic::RealGaussian).log_partition().is_err());
    }

    #[test]
    fn gamma_log_partition_matches_quadrature() {
        // Independent oracle: trapezoidal quadrature of x^(a-1) e^(-bx) on a fine grid.
        for &(a, b) in &[(1.0f64, 1.0f64), (2.5, 0.7), (4.0, 3.0)] {
            let d = D::gamma(a, b);
            let h = 1e-4;
            let mut s = 0.0;
            let mut x = h / 2.0;
            while x < 80.0 / b {
                s += (d.log_unnormalized(Value::Real(x)).unwrap()).exp() * h;
                x += h;
            }
            assert!(close(d.log_partition().unwrap(), s.ln(), 1e-6), "a={a} b={b}");
        }
        assert!(D::gamma(1.0, 1.0).log_partition().unwrap().abs() < 1e-14);
    }

    #[test]
    fn point_mass_behaviour() {
        let p = D::point_mass(2.0);
        assert_eq!(p.multiply(&p).unwrap(), p);
        assert!(p.multiply(&D::point_mass(1.0)).is_err());
        assert_eq!(p.log_partition().unwrap(), 0.0);
        assert_eq!(p.kl(&p).unwrap(), 0.0);
    }

    #[test]
    fn project_is_identity_on_members() {
        let d = D::complex_gaussian(Complex::new(1.0, 0.0), 2.0);
        let p = project(SufficientStatistic::ComplexGaussian, &d).unwrap();
        for (a, b) in p.natural().iter().zip(d.natural()) {
            assert!(close(*a, *b, 1e-14));
        }
    }

    fn arb_member() -> impl Strategy<Value = D> {
        prop_oneof![
            (-5.0..5.0f64, 0.05..10.0f64).prop_map(|(m, v)| D::real_gaussian(m, v)),
            (-5.0..5.0f64, -5.0..5.0f64, 0.05..10.0f64)
                .prop_map(|(r, i, v)| D::complex_gaussian(Complex::new(r, i), v)),
            (0.2..20.0f64, 0.1..10.0f64).prop_map(|(a, b)| D::gamma(a, b)),
            proptest::collection::vec(0.01..1.0f64, 4).prop_map(|w| D::categorical(&w)),
        ]
    }

    fn arb_pair() -> impl Strategy<Value = (D, D)> {
        prop_oneof![
            ((-5.0..5.0f64, 0.05..10.0f64), (-5.0..5.0f64, 0.05..10.0f64))
                .prop_map(|((m1, v1), (m2, v2))| (D::real_gaussian(m1, v1), D::real_gaussian(m2, v2))),
            (
                (-5.0..5.0f64, -5.0..5.0f64, 0.05..10.0f64),
                (-5.0..5.0f64, -5.0..5.0f64, 0.05..10.0f64)
            )
                .prop_map(|((a, b, c), (d, e, f))| (
                    D::complex_gaussian(Complex::new(a, b), c),
                    D::complex_gaussian(Complex::new(d, e), f)
                )),
            ((0.2..20.0f64, 0.1..10.0f64), (0.2..20.0f64, 0.1..10.0f64))
                .prop_map(|((a, b), (c, d))| (D::gamma(a, b), D::gamma(c, d))),
            (
                proptest::collection::vec(0.01..1.0f64, 3),
                proptest::collection::vec(0.01..1.0f64, 3)
            )
                .prop_map(|(a, b)| (D::categorical(&a), D::categorical(&b))),
        ]
    }

    proptest! {
        #[test]
        fn multiply_undoes_divide((a, b) in arb_pair()) {
            let back = a.divide(&b).unwrap().multiply(&b).unwrap();
            for (x, y) in back.natural().iter().zip(a.natural()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn moments_round_trip(d in arb_member()) {
            let back = D::from_moments(d.statistic(), &d.to_moments().unwrap()).unwrap();
            let (m1, m2) = (d.to_moments().unwrap().0, back.to_moments().unwrap().0);
            for (x, y) in m1.iter().zip(&m2) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn gradient_of_log_partition_is_mean(d in arb_member()) {
            let theta = d.to_moments().unwrap().0;
            let eta = d.natural().to_vec();
            for j in 0..eta.len() {
                let h = 1e-6 * (1.0 + eta[j].abs());
                let mut up = eta.clone();
                up[j] += h;
                let mut dn = eta.clone();
                dn[j] -= h;
                let fu = D::from_natural(d.statistic(), up).unwrap().log_partition().unwrap();
                let fd = D::from_natural(d.statistic(), dn).unwrap().log_partition().unwrap();
                let g = (fu - fd) / (2.0 * h);
                prop_assert!((g - theta[j]).abs() <= 1e-6 * (1.0 + theta[j].abs()),
                    "component {} fd {} vs {}", j, g, theta[j]);
            }
        }

        #[test]
        fn kl_is_zero_on_self_and_nonnegative((a, b) in arb_pair()) {
            prop_assert!(a.kl(&a).unwrap().abs() < 1e-10);
            prop_assert!(a.kl(&b).unwrap() >= -1e-10);
        }
    }
}
