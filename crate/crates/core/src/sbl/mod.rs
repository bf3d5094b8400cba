//! Sparse Bayesian learning for `y = Ax + w`, `w ~ CN(0, λ⁻¹I)`.
//!
//! Four array-based solvers share one state layout ([`SblState`]):
//!
//! * [`solve_ep`]: EP with per-(n, m) extrinsic messages `(α̃, τ̃)`, optional damping.
//! * [`solve_ep_variant`]: variance-consistency form that tracks `τ̃` only.
//! * [`solve_amp`]: AMP, i.e. the variant with the cavity self-terms dropped.
//! * [`solve_hybrid`]: EM-VMP with unknown `λ` and per-entry variances `α`.
//!
//! Index 0 of the cavity arrays is the prior side; rows `n = 1..N` are the
//! observation side. Arrays of shape N×M are stored row-major.

mod ep;
mod hybrid;
mod io;
mod oracle;
mod variant;

pub use ep::solve_ep;
pub use hybrid::solve_hybrid;
pub use io::{read_problem, write_problem, ProblemFile};
pub use oracle::{denoise_bg_quadrature, exact_mmse_gaussian, genie_lmmse};
pub use variant::{solve_amp, solve_ep_variant};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::expfam::{GenericPrior, PosteriorMoments};
use crate::{abs2, Error, Real, Result};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for n in 0..rows {
            for m in 0..cols {
                data.push(f(n, m));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            Complex::new(if i == j { T::one() } else { T::zero() }, T::zero())
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, n: usize) -> &[Complex<T>] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn get(&self, n: usize, m: usize) -> Complex<T> {
        self.data[n * self.cols + m]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        (0..self.rows)
            .map(|n| {
                self.row(n)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `Aᴴ v`.
    pub fn adjoint_mul_vec(&self, v: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (n, vn) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(n)) {
                *o += a.conj() * *vn;
            }
        }
        out
    }

    /// `|a_{n,m}|²`, row-major.
    pub fn abs2(&self) -> Vec<T> {
        self.data.iter().map(|z| abs2(*z)).collect()
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| *z * k).collect(),
        }
    }

    /// Columns `cols` as a new matrix.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |n, j| self.get(n, cols[j]))
    }
}

/// Hyper-prior of the hybrid solver: `α_m` governed by `(ε, η)`, and a
/// Gamma(c, d) prior on `λ` (`c = d = 0` is non-informative).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalGamma<T> {
    pub epsilon: T,
    pub eta: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> Default for HierarchicalGamma<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(1.5),
            eta: T::one(),
            c: T::zero(),
            d: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SblPrior<T> {
    Known(GenericPrior<T>),
    Hierarchical(HierarchicalGamma<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SblProblem<T> {
    pub a: CMatrix<T>,
    pub y: Vec<Complex<T>>,
    /// Noise precision; `None` for the hybrid solver.
    pub lambda: Option<T>,
    pub prior: SblPrior<T>,
}

impl<T: Real> SblProblem<T> {
    pub fn new(a: CMatrix<T>, y: Vec<Complex<T>>, lambda: Option<T>, prior: SblPrior<T>) -> Result<Self> {
        if a.rows() != y.len() {
            return Err(Error::Dimension(format!(
                "A has {} rows, y has {} entries",
                a.rows(),
                y.len()
            )));
        }
        if a.rows() == 0 || a.cols() == 0 {
            return Err(Error::Dimension("empty system".into()));
        }
        if let Some(l) = lambda {
            if !(l > T::zero()) || !l.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "lambda",
                    reason: format!("{l} is not a positive precision"),
                });
            }
        }
        if let SblPrior::Known(GenericPrior::ZeroMeanGaussianVec { alpha }) = &prior {
            if alpha.len() != a.cols() {
                return Err(Error::Dimension(format!(
                    "{} prior variances for {} unknowns",
                    alpha.len(),
                    a.cols()
                )));
            }
        }
        Ok(Self { a, y, lambda, prior })
    }

    /// Known-model problem with a generic prior.
    pub fn known(a: CMatrix<T>, y: Vec<Complex<T>>, lambda: T, prior: GenericPrior<T>) -> Result<Self> {
        Self::new(a, y, Some(lambda), SblPrior::Known(prior))
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub(crate) fn known_parts(&self) -> Result<(T, &GenericPrior<T>)> {
        match (&self.prior, self.lambda) {
            (SblPrior::Known(p), Some(l)) => Ok((l, p)),
            _ => Err(Error::InvalidParameter {
                name: "problem",
                reason: "solver needs a known noise precision and prior".into(),
            }),
        }
    }
}

/// Deliberate faults for mutation testing of the verify suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultInjection {
    /// Negates the residual `β_n` in the variant and AMP solvers.
    FlipBetaSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    /// Defaults to M.
    pub max_iter: Option<usize>,
    /// On `‖x̂_new − x̂_old‖∞`.
    pub tol: T,
    /// κ ∈ (0, 1].
    pub damping: T,
    /// Guard for precisions and denominators.
    pub var_floor: T,
    /// Averaged-variance correction (AMP only).
    pub finite_n_correction: bool,
    /// Drops the cavity self-terms in the variant solver, which turns it
    /// into AMP; used to check that the two differ only there.
    pub drop_self_terms: bool,
    /// Keeps a copy of the state after every iteration.
    pub record_trajectory: bool,
    #[doc(hidden)]
    pub fault: Option<FaultInjection>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: None,
            tol: T::lit(1e-8),
            damping: T::one(),
            var_floor: T::lit(1e-12),
            finite_n_correction: false,
            drop_self_terms: false,
            record_trajectory: false,
            fault: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn with_damping(mut self, kappa: T) -> Self {
        self.damping = kappa;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = Some(max_iter);
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: format!("{} is outside (0, 1]", self.damping),
            });
        }
        if !(self.tol >= T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("{} is negative", self.tol),
            });
        }
        if !(self.var_floor > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "var_floor",
                reason: format!("{} is not positive", self.var_floor),
            });
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub(crate) fn iterations(&self, m: usize) -> usize {
        self.max_iter.unwrap_or(m)
    }
}

/// Every array of the solvers. Arrays a solver does not use stay empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SblState<T> {
    /// Cavity `α_{n,m}` (N×M).
    pub alpha: Vec<Complex<T>>,
    /// Cavity `τ_{n,m}` (N×M).
    pub tau: Vec<T>,
    /// Extrinsic `α̃_{n,m}` (N×M).
    pub alpha_ext: Vec<Complex<T>>,
    /// Extrinsic `τ̃_{n,m}` (N×M).
    pub tau_ext: Vec<T>,
    /// Prior-side extrinsic `α̃_{0,m}`.
    pub alpha0_ext: Vec<Complex<T>>,
    /// Prior-side extrinsic `τ̃_{0,m}`.
    pub tau0_ext: Vec<T>,
    pub beta: Vec<Complex<T>>,
    pub gamma_z: Vec<T>,
    pub mu_z: Vec<Complex<T>>,
    pub mu_x: Vec<Complex<T>>,
    /// `τ_{0,m} = Σ_n τ̃_{n,m}`.
    pub tau0: Vec<T>,
    /// `α_{0,m} = Σ_n α̃_{n,m}`.
    pub alpha0: Vec<Complex<T>>,
    /// `E[x_m | b_x]`.
    pub mean: Vec<Complex<T>>,
    /// `Var[x_m | b_x]`.
    pub var: Vec<T>,
    /// `E[|x_m|² | b_x]`.
    pub second: Vec<T>,
    pub lambda_hat: Option<T>,
    pub alpha_hat: Vec<T>,
    pub epsilon: Option<T>,
    pub e_old: Option<T>,
    pub e_new: Option<T>,
}

impl<T: Real> SblState<T> {
    /// Beliefs at the prior moments.
    pub(crate) fn from_prior(prior: &GenericPrior<T>, m: usize) -> Self {
        let mut s = Self::default();
        for j in 0..m {
            let (mean, var) = prior.prior_moments(j);
            s.mean.push(mean);
            s.var.push(var);
            s.second.push(abs2(mean) + var);
        }
        s
    }

    pub(crate) fn set_belief(&mut self, j: usize, p: PosteriorMoments<T>, floor: T) {
        self.mean[j] = p.mean;
        self.var[j] = p.var.max(floor);
        self.second[j] = p.second;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult<T> {
    pub x_hat: Vec<Complex<T>>,
    pub var: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `e = ‖y − A x̂‖²/N` per iteration (hybrid).
    pub residuals: Vec<T>,
    pub lambda_hat: Option<T>,
    pub alpha_hat: Option<Vec<T>>,
    /// `ε` per iteration (hybrid).
    pub epsilons: Vec<T>,
    /// Entries or rows whose update was skipped by a guard.
    pub skips: usize,
    pub trajectory: Vec<SblState<T>>,
}

impl<T: Real> SolverResult<T> {
    pub(crate) fn from_state(state: &SblState<T>, iterations: usize, converged: bool, skips: usize) -> Self {
        Self {
            x_hat: state.mean.clone(),
            var: state.var.clone(),
            iterations,
            converged,
            residuals: Vec::new(),
            lambda_hat: None,
            alpha_hat: None,
            epsilons: Vec::new(),
            skips,
            trajectory: Vec::new(),
        }
    }
}

/// Posterior moments of `(1 − ρ)δ(x) + ρ CN(x; 0, v₀)` times `CN(x; μ, τ)`.
///
/// Returns `(mean, variance, E|x|²)`.
pub fn denoise_bg<T: Real>(rho: T, v0: T, mu: Complex<T>, tau: T) -> Result<(Complex<T>, T, T)> {
    let p = crate::expfam::bernoulli_gaussian_posterior(rho, v0, mu, tau)?;
    Ok((p.mean, p.var, p.second))
}

/// `‖x̂ − x‖² / ‖x‖²`.
pub fn nmse<T: Real>(x_hat: &[Complex<T>], x: &[Complex<T>]) -> Result<T> {
    if x_hat.len() != x.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} entries",
            x_hat.len(),
            x.len()
        )));
    }
    let energy: T = x.iter().map(|z| abs2(*z)).sum();
    if energy == T::zero() {
        return Err(Error::ZeroReference);
    }
    let err: T = x_hat.iter().zip(x).map(|(a, b)| abs2(*a - *b)).sum();
    Ok(err / energy)
}

/// Lowest value [`nmse_db`] reports.
pub const NMSE_DB_FLOOR: f64 = -120.0;

/// `10 log₁₀` of the mean linear NMSE, floored at −120 dB.
pub fn nmse_db<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::nan();
    }
    let mean = values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len());
    (T::lit(10.0) * mean.log10()).max(T::lit(NMSE_DB_FLOOR))
}

/// `‖x̂_new − x̂_old‖∞`.
pub(crate) fn max_change<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = (*x - *y).norm();
        if d.is_nan() {
            T::infinity()
        } else {
            acc.max(d)
        }
    })
}

#[cfg(test)]
mod tests;
