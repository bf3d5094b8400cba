use num_complex::Complex;

use super::{max_change, SblProblem, SblState, SolverConfig, SolverResult};
use crate::{Real, Result};

/// EP with per-(n, m) extrinsic messages.
///
/// Each iteration forms the cavities `α_{n,m} = Σ_{n′≠n} α̃_{n′,m}` and
/// `τ_{n,m}` (index 0 being the prior side), the z-side moments
/// `γ_{z,n} = Σ_m |a|²/τ_{n,m}` and `μ_{z,n} = Σ_m a α_{n,m}/τ_{n,m}`, then the
/// extrinsic updates
///
/// ```text
/// α̃_{n,m} = [a*(y_n − μ_{z,n}) + α_{n,m}|a|²/τ_{n,m}] / [λ⁻¹ + γ_{z,n} − |a|²/τ_{n,m}]
/// τ̃_{n,m} = |a|² / [λ⁻¹ + γ_{z,n} − |a|²/τ_{n,m}]
/// ```
///
/// damped by κ, and finally the belief from the prior and the pseudo
/// observation `CN(α₀/τ₀, 1/τ₀)`. A row with a non-positive cavity precision,
/// or an entry with a non-positive denominator, keeps its old messages and
/// is counted in `skips`.
pub fn solve_ep<T: Real>(problem: &SblProblem<T>, config: &SolverConfig<T>) -> Result<SolverResult<T>> {
    config.validate()?;
    let (lambda, prior) = problem.known_parts()?;
    let (n_rows, m_cols) = (problem.n(), problem.m());
    let a = &problem.a;
    let a2 = a.abs2();
    let floor = config.var_floor;
    let kappa = config.damping;
    let inv_lambda = lambda.recip();
    let zero = Complex::new(T::zero(), T::zero());

    let mut s = SblState::from_prior(prior, m_cols);
    s.alpha_ext = vec![zero; n_rows * m_cols];
    s.tau_ext = vec![T::zero(); n_rows * m_cols];
    s.alpha0_ext = vec![zero; m_cols];
    s.tau0_ext = vec![T::zero(); m_cols];
    s.alpha0 = vec![zero; m_cols];
    s.tau0 = vec![T::zero(); m_cols];
    s.gamma_z = vec![T::zero(); n_rows];
    s.mu_z = vec![zero; n_rows];
    s.mu_x = vec![zero; m_cols];
    if config.record_trajectory {
        s.alpha = vec![zero; n_rows * m_cols];
        s.tau = vec![T::zero(); n_rows * m_cols];
    }

    let mut tot_a = vec![zero; m_cols];
    let mut tot_t = vec![T::zero(); m_cols];
    let mut skips = 0;
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..config.iterations(m_cols) {
        iterations += 1;
        for j in 0..m_cols {
            s.alpha0_ext[j] = s.mean[j] / s.var[j] - s.alpha0[j];
            s.tau0_ext[j] = s.var[j].recip() - s.tau0[j];
            tot_a[j] = s.alpha0_ext[j] + s.alpha0[j];
            tot_t[j] = s.tau0_ext[j] + s.tau0[j];
        }
        for n in 0..n_rows {
            let row = a.row(n);
            let base = n * m_cols;
            let mut gz = T::zero();
            let mut muz = zero;
            let mut row_ok = true;
            for j in 0..m_cols {
                let t = tot_t[j] - s.tau_ext[base + j];
                let al = tot_a[j] - s.alpha_ext[base + j];
                if !(t > floor) {
                    row_ok = false;
                }
                gz += a2[base + j] / t;
                muz += row[j] * al / t;
                if config.record_trajectory {
                    s.alpha[base + j] = al;
                    s.tau[base + j] = t;
                }
            }
            s.gamma_z[n] = gz;
            s.mu_z[n] = muz;
            if !row_ok || !gz.is_finite() {
                skips += m_cols;
                continue;
            }
            let resid = problem.y[n] - muz;
            for j in 0..m_cols {
                let t = tot_t[j] - s.tau_ext[base + j];
                let al = tot_a[j] - s.alpha_ext[base + j];
                let self_term = a2[base + j] / t;
                let den = inv_lambda + gz - self_term;
                if !(den > floor) || !den.is_finite() {
                    skips += 1;
                    continue;
                }
                let pa = (row[j].conj() * resid + al * self_term) / den;
                let pt = a2[base + j] / den;
                if kappa == T::one() {
                    s.alpha_ext[base + j] = pa;
                    s.tau_ext[base + j] = pt;
                } else {
                    let keep = T::one() - kappa;
                    s.alpha_ext[base + j] = s.alpha_ext[base + j] * keep + pa * kappa;
                    s.tau_ext[base + j] = keep * s.tau_ext[base + j] + kappa * pt;
                }
            }
        }
        for j in 0..m_cols {
            let mut sa = zero;
            let mut st = T::zero();
            for n in 0..n_rows {
                sa += s.alpha_ext[n * m_cols + j];
                st += s.tau_ext[n * m_cols + j];
            }
            s.alpha0[j] = sa;
            s.tau0[j] = st;
        }
        let old = s.mean.clone();
        for j in 0..m_cols {
            let mut t0 = s.tau0[j];
            if !(t0 > floor) {
                skips += 1;
                t0 = floor;
            }
            s.mu_x[j] = s.alpha0[j] / t0;
            let post = prior.posterior(j, s.mu_x[j], t0.recip())?;
            s.set_belief(j, post, floor);
        }
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
