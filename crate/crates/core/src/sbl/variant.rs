use num_complex::Complex;

use super::{max_change, CMatrix, FaultInjection, SblProblem, SblState, SolverConfig, SolverResult};
use crate::expfam::PosteriorMoments;
use crate::{Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Variant { drop_self: bool },
    Amp { finite_n: bool },
}

/// Sizes the arrays one pass touches.
pub(crate) fn init_arrays<T: Real>(s: &mut SblState<T>, n: usize, m: usize, record: bool) {
    let zero = Complex::new(T::zero(), T::zero());
    s.tau_ext = vec![T::zero(); n * m];
    s.tau0_ext = vec![T::zero(); m];
    s.tau0 = vec![T::zero(); m];
    s.beta = vec![zero; n];
    s.gamma_z = vec![T::zero(); n];
    s.mu_z = vec![zero; n];
    s.mu_x = vec![zero; m];
    if record {
        s.tau = vec![T::zero(); n * m];
    }
}

fn damp<T: Real>(old: T, new: T, kappa: T) -> T {
    if kappa == T::one() {
        new
    } else {
        (T::one() - kappa) * old + kappa * new
    }
}

/// One iteration of the shared-residual recursion. `posterior(m, μ, v)`
/// returns the belief moments for the pseudo observation `CN(μ, v)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pass<T: Real>(
    a: &CMatrix<T>,
    a2: &[T],
    y: &[Complex<T>],
    lambda: T,
    s: &mut SblState<T>,
    config: &SolverConfig<T>,
    mode: Mode,
    mut posterior: impl FnMut(usize, Complex<T>, T) -> Result<PosteriorMoments<T>>,
    skips: &mut usize,
) -> Result<()> {
    let (n_rows, m_cols) = (a.rows(), a.cols());
    let floor = config.var_floor;
    let kappa = config.damping;
    let inv_lambda = lambda.recip();
    let n_real = T::from_usize_lossy(n_rows);

    let mut tot = vec![T::zero(); m_cols];
    for j in 0..m_cols {
        let inv_v = s.var[j].recip();
        s.tau0_ext[j] = match mode {
            Mode::Variant { .. } => inv_v - s.tau0[j],
            Mode::Amp { finite_n: false } => inv_v,
            Mode::Amp { finite_n: true } => {
                let g = inv_v - s.tau0[j] / n_real;
                if g > floor {
                    g
                } else {
                    *skips += 1;
                    inv_v
                }
            }
        };
        if let Mode::Variant { .. } = mode {
            tot[j] = s.tau0_ext[j] + (0..n_rows).map(|n| s.tau_ext[n * m_cols + j]).sum::<T>();
        }
    }
    let cavity = |s: &SblState<T>, idx: usize, j: usize| match mode {
        Mode::Variant { drop_self: false } => tot[j] - s.tau_ext[idx],
        Mode::Variant { drop_self: true } => tot[j],
        Mode::Amp { .. } => s.tau0_ext[j],
    };
    let self_terms = mode == Mode::Variant { drop_self: false };

    let ax = a.mul_vec(&s.mean);
    for n in 0..n_rows {
        let base = n * m_cols;
        let mut gz = T::zero();
        let mut ok = true;
        for j in 0..m_cols {
            let t = cavity(s, base + j, j);
            if !(t > floor) {
                ok = false;
            }
            gz += a2[base + j] / t;
            if config.record_trajectory {
                s.tau[base + j] = t;
            }
        }
        s.gamma_z[n] = gz;
        let muz = ax[n] - s.beta[n] * gz;
        s.mu_z[n] = muz;
        if !ok || !gz.is_finite() {
            *skips += m_cols;
            continue;
        }
        let mut b = (y[n] - muz) / (inv_lambda + gz);
        if config.fault == Some(FaultInjection::FlipBetaSign) {
            b = -b;
        }
        s.beta[n] = if kappa == T::one() {
            b
        } else {
            s.beta[n] * (T::one() - kappa) + b * kappa
        };
        for j in 0..m_cols {
            let den = if self_terms {
                gz + inv_lambda - a2[base + j] / cavity(s, base + j, j)
            } else {
                gz + inv_lambda
            };
            if !(den > floor) || !den.is_finite() {
                *skips += 1;
                continue;
            }
            s.tau_ext[base + j] = damp(s.tau_ext[base + j], a2[base + j] / den, kappa);
        }
    }

    let ahb = a.adjoint_mul_vec(&s.beta);
    for j in 0..m_cols {
        let raw: T = (0..n_rows).map(|n| s.tau_ext[n * m_cols + j]).sum();
        let mut t0 = raw;
        if let Mode::Amp { finite_n: true } = mode {
            let pv = raw.recip() - (n_real * s.tau0_ext[j]).recip();
            if pv > floor {
                t0 = pv.recip();
            } else {
                *skips += 1;
            }
        }
        if !(t0 > floor) {
            *skips += 1;
            t0 = floor;
        }
        s.tau0[j] = t0;
        s.mu_x[j] = s.mean[j] + ahb[j] / t0;
        let post = posterior(j, s.mu_x[j], t0.recip())?;
        s.set_belief(j, post, floor);
    }
    Ok(())
}

fn run<T: Real>(problem: &SblProblem<T>, config: &SolverConfig<T>, mode: Mode) -> Result<SolverResult<T>> {
    config.validate()?;
    let (lambda, prior) = problem.known_parts()?;
    let (n, m) = (problem.n(), problem.m());
    let a2 = problem.a.abs2();
    let mut s = SblState::from_prior(prior, m);
    init_arrays(&mut s, n, m, config.record_trajectory);
    let mut skips = 0;
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.iterations(m) {
        iterations += 1;
        let old = s.mean.clone();
        pass(
            &problem.a,
            &a2,
            &problem.y,
            lambda,
            &mut s,
            config,
            mode,
            |j, mu, v| prior.posterior(j, mu, v),
            &mut skips,
        )?;
        if config.record_trajectory {
            trajectory.push(s.clone());
        }
        let delta = max_change(&s.mean, &old);
        if !delta.is_finite() {
            break;
        }
        if delta < config.tol {
            converged = true;
            break;
        }
    }
    let mut out = SolverResult::from_state(&s, iterations, converged, skips);
    out.trajectory = trajectory;
    Ok(out)
}

/// EP with one residual per row and one precision per (n, m).
///
/// Per iteration:
///
/// ```text
/// τ̃_{0,m} = 1/Var_m − τ_{0,m}      τ_{n,m} = τ̃_{0,m} + Σ_{n′≠n} τ̃_{n′,m}
/// γ_{z,n} = Σ_m |a|²/τ_{n,m}       μ_{z,n} = (A E[x])_n − β_n γ_{z,n}
/// β_n     = (y_n − μ_{z,n}) / (λ⁻¹ + γ_{z,n})
/// τ̃_{n,m} = |a|² / (γ_{z,n} + λ⁻¹ − |a|²/τ_{n,m})
/// μ_{x,m} = E[x_m] + (Aᴴβ)_m / τ_{0,m}
/// ```
///
/// with `τ_{0,m} = Σ_n τ̃_{n,m}` and the belief from the prior and
/// `CN(μ_{x,m}, 1/τ_{0,m})`. κ damps β and τ̃. With
/// [`SolverConfig::drop_self_terms`] the cavity becomes the total, which is
/// the AMP recursion.
pub fn solve_ep_variant<T: Real>(problem: &SblProblem<T>, config: &SolverConfig<T>) -> Result<SolverResult<T>> {
    run(
        problem,
        config,
        Mode::Variant {
            drop_self: config.drop_self_terms,
        },
    )
}

/// AMP: the variant recursion with every cavity replaced by `1/Var_m`.
///
/// With [`SolverConfig::finite_n_correction`] the prior side uses
/// `γ̃_m = 1/Var_m − τ_{0,m}/N` and the pseudo variance becomes
/// `1/Σ_n τ̃_{n,m} − 1/(N γ̃_m)`; either falls back to the uncorrected value
/// (and counts a skip) when not positive.
pub fn solve_amp<T: Real>(problem: &SblProblem<T>, config: &SolverConfig<T>) -> Result<SolverResult<T>> {
    run(
        problem,
        config,
        Mode::Amp {
            finite_n: config.finite_n_correction,
        },
    )
}
