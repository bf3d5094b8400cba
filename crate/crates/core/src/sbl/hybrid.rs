use num_complex::Complex;

use super::variant::{init_arrays, pass, Mode};
use super::{max_change, SblPrior, SblProblem, SblState, SolverConfig, SolverResult};
use crate::expfam::PosteriorMoments;
use crate::{abs2, Error, Real, Result};

/// Entries above this fraction of the largest |x̂| count as support.
const SUPPORT_FRACTION: f64 = 1e-3;
/// ε shrinks when the residual moves by less than this.
const RESIDUAL_STALL: f64 = 1e-6;
const EPSILON_DECAY: f64 = 0.95;

/// `[ε − 2 + √((ε − 2)² + 4η s)] / (2η)`.
pub(crate) fn alpha_update<T: Real>(epsilon: T, eta: T, second: T) -> T {
    let two = T::lit(2.0);
    let b = epsilon - two;
    (b + (b * b + T::lit(4.0) * eta * second).sqrt()) / (two * eta)
}

/// `(N + c) / (N e + Σ_n γ_n/(1 + λ γ_n) + d)`.
pub(crate) fn lambda_update<T: Real>(e: T, gamma_z: &[T], lambda_old: T, c: T, d: T) -> T {
    let n = T::from_usize_lossy(gamma_z.len());
    let s: T = gamma_z.iter().map(|g| *g / (T::one() + lambda_old * *g)).sum();
    (n + c) / (n * e + s + d)
}

/// Hybrid EM-VMP with unknown noise precision and per-entry prior variances.
///
/// Starts from `λ̂ = 100/Var(y)`, `α̂_m = 1/M`. Each iteration runs one pass
/// of the variant recursion under the prior `Π_m CN(0, α̂_m)`, then updates
/// `λ̂` (with the previous `λ̂` inside the sum) and `α̂`. The shape `ε` shrinks
/// by 5% whenever the residual stalls and the support does not shrink; the
/// run stops once `x̂` settles on an iteration that left `ε` alone.
pub fn solve_hybrid<T: Real>(problem: &SblProblem<T>, config: &SolverConfig<T>) -> Result<SolverResult<T>> {
    config.validate()?;
    let hyper = match &problem.prior {
        SblPrior::Hierarchical(h) => *h,
        SblPrior::Known(_) => {
            return Err(Error::InvalidParameter {
                name: "prior",
                reason: "the hybrid solver needs a hierarchical prior".into(),
            })
        }
    };
    if !(hyper.eta > T::zero()) || !(hyper.epsilon > T::zero()) || hyper.c < T::zero() || hyper.d < T::zero() {
        return Err(Error::InvalidParameter {
            name: "prior",
            reason: "ε and η must be positive, c and d non-negative".into(),
        });
    }
    let (n, m) = (problem.n(), problem.m());
    let y = &problem.y;
    let n_real = T::from_usize_lossy(n);
    let y_mean = y.iter().fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + *v) / n_real;
    let var_y = y.iter().map(|v| abs2(*v - y_mean)).sum::<T>() / n_real;
    if !(var_y > T::zero()) {
        return Err(Error::ZeroObservationVariance);
    }

    let floor = config.var_floor;
    let a2 = problem.a.abs2();
    let mut lambda = T::lit(100.0) / var_y;
    let mut alpha = vec![T::from_usize_lossy(m).recip(); m];
    let mut epsilon = hyper.epsilon;
    let mut e_old = T::zero();
    let mut prev_support: Option<usize> = None;

    let mut s = SblState {
        mean: vec![Complex::new(T::zero(), T::zero()); m],
        var: alpha.clone(),
        second: alpha.clone(),
        ..SblState::default()
    };
    init_arrays(&mut s, n, m, config.record_trajectory);

    let mut skips = 0;
    let mut residuals = Vec::new();
    let mut epsilons = Vec::new();
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.iterations(m) {
        iterations += 1;
        let old = s.mean.clone();
        pass(
            &problem.a,
            &a2,
            y,
            lambda,
            &mut s,
            config,
            Mode::Variant {
                drop_self: config.drop_self_terms,
            },
            |j, mu, v| {
                let tau0 = v.recip();
                let post_var = (alpha[j].recip() + tau0).recip();
                let mean = mu * (post_var * tau0);
                Ok(PosteriorMoments {
                    mean,
                    var: post_var,
                    second: abs2(mean) + post_var,
                })
            },
            &mut skips,
        )?;
        let delta = max_change(&s.mean, &old);

        let fit = problem.a.mul_vec(&s.mean);
        let e_new = y.iter().zip(&fit).map(|(a, b)| abs2(*a - *b)).sum::<T>() / n_real;
        lambda = lambda_update(e_new, &s.gamma_z, lambda, hyper.c, hyper.d);
        for (al, sec) in alpha.iter_mut().zip(&s.second) {
            *al = alpha_update(epsilon, hyper.eta, *sec).max(floor);
        }
        let peak = s.mean.iter().fold(T::zero(), |acc, v| acc.max(v.norm()));
        let support = s
            .mean
            .iter()
            .filter(|v| v.norm() > T::lit(SUPPORT_FRACTION) * peak)
            .count();
        let mut reduced = false;
        if (e_new - e_old).abs() < T::lit(RESIDUAL_STALL) && prev_support.is_none_or(|p| support >= p) {
            epsilon *= T::lit(EPSILON_DECAY);
            reduced = true;
        }
        prev_support = Some(support);

        s.lambda_hat = Some(lambda);
        s.alpha_hat = alpha.clone();
        s.epsilon = Some(epsilon);
        s.e_old = Some(e_old);
        s.e_new = Some(e_new);
        e_old = e_new;
        residuals.push(e_new);
        epsilons.push(epsilon);
        if config.record_trajectory {
            trajectory.push(s.clone());
        }
        if !delta.is_finite() || !lambda.is_finite() {
            break;
        }
        if delta < config.tol && !reduced {
            converged = true;
            break;
        }
    }

    let mut out = SolverResult::from_state(&s, iterations, converged, skips);
    out.residuals = residuals;
    out.epsilons = epsilons;
    out.lambda_hat = Some(lambda);
    out.alpha_hat = Some(alpha);
    out.trajectory = trajectory;
    Ok(out)
}
