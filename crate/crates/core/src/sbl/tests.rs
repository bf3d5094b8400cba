use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;

type C = Complex<f64>;

fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

fn cn(rng: &mut ChaCha8Rng, var: f64) -> C {
    let s = (var / 2.0).sqrt();
    c(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

fn gaussian_system(seed: u64, n: usize, m: usize, lambda: f64) -> (CMatrix<f64>, Vec<C>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(n, m, |_, _| cn(&mut rng, 1.0 / n as f64));
    let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..2.0)).collect();
    let x: Vec<C> = alpha.iter().map(|v| cn(&mut rng, *v)).collect();
    let y = a
        .mul_vec(&x)
        .into_iter()
        .map(|v| v + cn(&mut rng, 1.0 / lambda))
        .collect();
    (a, y, alpha)
}

fn bg_instance(seed: u64, n: usize, m: usize, rho: f64, snr_db: f64) -> (SblProblem<f64>, Vec<C>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(n, m, |_, _| cn(&mut rng, 1.0 / n as f64));
    let x: Vec<C> = (0..m)
        .map(|_| {
            if rng.random::<f64>() < rho {
                cn(&mut rng, 1.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .collect();
    let sigma2 = (m as f64 / n as f64) * rho / 10f64.powf(snr_db / 10.0);
    let y = a.mul_vec(&x).into_iter().map(|v| v + cn(&mut rng, sigma2)).collect();
    let prior = GenericPrior::bernoulli_gaussian(rho, 1.0).unwrap();
    (SblProblem::known(a, y, 1.0 / sigma2, prior).unwrap(), x)
}

fn close_rel(a: &[C], b: &[C], tol: f64) -> bool {
    let scale = b.iter().fold(1e-300f64, |acc, v| acc.max(v.norm()));
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol * scale)
}

fn tight() -> SolverConfig<f64> {
    SolverConfig::default().with_max_iter(5000).with_tol(1e-13)
}

#[test]
fn scalar_conjugate_case() {
    let a = CMatrix::from_row_major(1, 1, vec![c(1.0, 0.0)]).unwrap();
    let p = SblProblem::known(
        a,
        vec![c(2.0, 0.0)],
        1.0,
        GenericPrior::zero_mean_gaussian(vec![1.0]).unwrap(),
    )
    .unwrap();
    let one = SolverConfig::default().with_max_iter(1);
    let r = solve_ep(&p, &one).unwrap();
    assert!((r.x_hat[0] - c(1.0, 0.0)).norm() < 1e-15);
    assert!((r.var[0] - 0.5).abs() < 1e-15);
    // the shared-residual recursions need a few passes to settle there
    for r in [
        solve_ep_variant(&p, &tight()).unwrap(),
        solve_amp(&p, &tight()).unwrap(),
    ] {
        assert!(r.converged);
        assert!((r.x_hat[0] - c(1.0, 0.0)).norm() < 1e-9);
    }
    let bg = SblProblem::known(
        CMatrix::identity(1),
        vec![c(2.0, 0.0)],
        1.0,
        GenericPrior::bernoulli_gaussian(1.0, 1.0).unwrap(),
    )
    .unwrap();
    assert!((solve_ep(&bg, &one).unwrap().x_hat[0] - c(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn amp_matches_mmse_on_tall_system() {
    let (a, y, _) = gaussian_system(7, 200, 100, 100.0);
    let alpha = vec![1.0; 100];
    let (exact, _) = exact_mmse_gaussian(&a, &y, 100.0, &alpha).unwrap();
    let p = SblProblem::known(a, y, 100.0, GenericPrior::zero_mean_gaussian(alpha).unwrap()).unwrap();
    let r = solve_amp(&p, &tight()).unwrap();
    assert!(r.converged);
    let err: f64 = r.x_hat.iter().zip(&exact).map(|(u, v)| abs2(u - v)).sum::<f64>().sqrt();
    let norm: f64 = exact.iter().map(|v| abs2(*v)).sum::<f64>().sqrt();
    assert!(err / norm < 1e-3, "relative error {}", err / norm);
}

#[test]
fn mmse_matches_joint_covariance_form() {
    // E[x|y] = C Aᴴ (A C Aᴴ + λ⁻¹I)⁻¹ y, via nalgebra
    use nalgebra::{DMatrix, DVector};
    let (a, y, alpha) = gaussian_system(3, 6, 4, 5.0);
    let (mean, var) = exact_mmse_gaussian(&a, &y, 5.0, &alpha).unwrap();
    let am = DMatrix::from_fn(6, 4, |i, j| a.get(i, j));
    let cx = DMatrix::from_diagonal(&DVector::from_iterator(4, alpha.iter().map(|v| c(*v, 0.0))));
    let s = &am * &cx * am.adjoint() + DMatrix::identity(6, 6) * c(1.0 / 5.0, 0.0);
    let s_inv = s.try_inverse().unwrap();
    let gain = &cx * am.adjoint() * &s_inv;
    let x = &gain * DVector::from_vec(y.clone());
    let cov = &cx - &gain * &am * &cx;
    for j in 0..4 {
        assert!((mean[j] - x[j]).norm() < 1e-10);
        assert!((var[j] - cov[(j, j)].re).abs() < 1e-10);
    }
}

#[test]
fn mmse_noiseless_identity_limit() {
    let y = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 0.0)];
    let (x, _) = exact_mmse_gaussian(&CMatrix::identity(3), &y, 1e9, &[1.0; 3]).unwrap();
    assert!(close_rel(&x, &y, 1e-8));
}

#[test]
fn genie_with_full_support_is_mmse() {
    let (a, y, _) = gaussian_system(11, 6, 4, 20.0);
    let g = genie_lmmse(&a, &y, 20.0, 1.5, &[0, 1, 2, 3]).unwrap();
    let (m, _) = exact_mmse_gaussian(&a, &y, 20.0, &[1.5; 4]).unwrap();
    assert!(close_rel(&g, &m, 1e-14));
}

#[test]
fn genie_two_columns_closed_form() {
    let (a, y, _) = gaussian_system(12, 6, 4, 20.0);
    let x = genie_lmmse(&a, &y, 20.0, 1.0, &[1, 3]).unwrap();
    // (λ SᴴS + I) u = λ Sᴴ y solved by Cramer's rule
    let s = |r: usize, k: usize| a.get(r, [1, 3][k]);
    let mut h = [[c(0.0, 0.0); 2]; 2];
    let mut b = [c(0.0, 0.0); 2];
    for k in 0..2 {
        for l in 0..2 {
            h[k][l] = (0..6).map(|r| s(r, k).conj() * s(r, l)).sum::<C>() * 20.0;
        }
        h[k][k] += c(1.0, 0.0);
        b[k] = (0..6).map(|r| s(r, k).conj() * y[r]).sum::<C>() * 20.0;
    }
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let u0 = (b[0] * h[1][1] - h[0][1] * b[1]) / det;
    let u1 = (h[0][0] * b[1] - h[1][0] * b[0]) / det;
    assert!((x[1] - u0).norm() < 1e-12 && (x[3] - u1).norm() < 1e-12);
    assert_eq!(x[0], c(0.0, 0.0));
}

#[test]
fn dropping_self_terms_reproduces_amp() {
    let (p, _) = bg_instance(5, 40, 80, 0.15, 30.0);
    let mut cfg = SolverConfig::default().with_max_iter(25).with_tol(0.0);
    cfg.record_trajectory = true;
    let amp = solve_amp(&p, &cfg).unwrap();
    cfg.drop_self_terms = true;
    let var = solve_ep_variant(&p, &cfg).unwrap();
    assert_eq!(amp.trajectory.len(), var.trajectory.len());
    let rel = |u: f64, v: f64| (u - v).abs() <= 1e-12 * u.abs().max(v.abs()).max(1e-300);
    let relc = |u: C, v: C| (u - v).norm() <= 1e-12 * u.norm().max(v.norm()).max(1e-300);
    for (s, t) in amp.trajectory.iter().zip(&var.trajectory) {
        for (u, v) in s.tau_ext.iter().zip(&t.tau_ext) {
            assert!(rel(*u, *v));
        }
        for (xs, ys) in [(&s.gamma_z, &t.gamma_z), (&s.tau0, &t.tau0), (&s.var, &t.var)] {
            assert!(xs.iter().zip(ys.iter()).all(|(u, v)| rel(*u, *v)));
        }
        for (xs, ys) in [
            (&s.beta, &t.beta),
            (&s.mu_z, &t.mu_z),
            (&s.mu_x, &t.mu_x),
            (&s.mean, &t.mean),
        ] {
            assert!(xs.iter().zip(ys.iter()).all(|(u, v)| relc(*u, *v)));
        }
    }
}

#[test]
fn self_terms_change_the_precisions() {
    let (p, _) = bg_instance(5, 40, 80, 0.15, 30.0);
    let cfg = SolverConfig::default().with_max_iter(3);
    let a = solve_ep_variant(&p, &cfg).unwrap();
    let b = solve_amp(&p, &cfg).unwrap();
    assert!(!close_rel(&a.x_hat, &b.x_hat, 1e-9));
}

#[test]
fn unit_damping_is_the_undamped_run() {
    let (p, _) = bg_instance(9, 30, 60, 0.2, 25.0);
    let mut cfg = SolverConfig::default().with_max_iter(30);
    cfg.record_trajectory = true;
    let a = solve_ep(&p, &cfg).unwrap();
    let b = solve_ep(&p, &cfg.clone().with_damping(1.0)).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    let c5 = solve_ep(&p, &cfg.with_damping(0.5)).unwrap();
    assert_ne!(a.trajectory, c5.trajectory);
}

#[test]
fn damped_ep_reaches_the_same_mmse_fixed_point() {
    let (a, y, alpha) = gaussian_system(21, 6, 5, 10.0);
    let (exact, _) = exact_mmse_gaussian(&a, &y, 10.0, &alpha).unwrap();
    let p = SblProblem::known(a, y, 10.0, GenericPrior::zero_mean_gaussian(alpha).unwrap()).unwrap();
    let r = solve_ep(&p, &tight().with_damping(0.5)).unwrap();
    assert!(close_rel(&r.x_hat, &exact, 1e-6));
}

#[test]
fn flipped_residual_breaks_mmse() {
    let (a, y, alpha) = gaussian_system(2, 8, 6, 10.0);
    let (exact, _) = exact_mmse_gaussian(&a, &y, 10.0, &alpha).unwrap();
    let p = SblProblem::known(a, y, 10.0, GenericPrior::zero_mean_gaussian(alpha).unwrap()).unwrap();
    let mut cfg = tight().with_max_iter(200);
    assert!(close_rel(&solve_ep_variant(&p, &cfg).unwrap().x_hat, &exact, 1e-6));
    cfg.fault = Some(FaultInjection::FlipBetaSign);
    assert!(!close_rel(&solve_ep_variant(&p, &cfg).unwrap().x_hat, &exact, 1e-2));
}

#[test]
fn scale_covariance() {
    let (a, y, alpha) = gaussian_system(4, 7, 5, 8.0);
    let k = 10.0;
    let run = |y: Vec<C>, alpha: Vec<f64>, lambda: f64| {
        let p = SblProblem::known(a.clone(), y, lambda, GenericPrior::zero_mean_gaussian(alpha).unwrap()).unwrap();
        (
            solve_ep(&p, &tight()).unwrap().x_hat,
            solve_ep_variant(&p, &tight()).unwrap().x_hat,
        )
    };
    let (e1, v1) = run(y.clone(), alpha.clone(), 8.0);
    let ys = y.iter().map(|v| v * k).collect();
    let al = alpha.iter().map(|v| v * k * k).collect();
    let (e2, v2) = run(ys, al, 8.0 / (k * k));
    let scaled = |v: &[C]| v.iter().map(|x| x * k).collect::<Vec<_>>();
    assert!(close_rel(&e2, &scaled(&e1), 1e-9));
    assert!(close_rel(&v2, &scaled(&v1), 1e-9));
}

#[test]
fn zero_observation_variance_is_rejected() {
    let a = CMatrix::from_fn(3, 4, |i, j| c(i as f64 + 1.0, j as f64));
    let p = SblProblem::new(
        a,
        vec![c(0.5, 0.5); 3],
        None,
        SblPrior::Hierarchical(HierarchicalGamma::default()),
    )
    .unwrap();
    assert_eq!(
        solve_hybrid(&p, &SolverConfig::default()),
        Err(Error::ZeroObservationVariance)
    );
}

#[test]
fn hybrid_rejects_known_model_and_known_rejects_hybrid() {
    let (p, _) = bg_instance(1, 10, 20, 0.1, 30.0);
    assert!(solve_hybrid(&p, &SolverConfig::default()).is_err());
    let h = SblProblem::new(
        p.a.clone(),
        p.y.clone(),
        None,
        SblPrior::Hierarchical(HierarchicalGamma::default()),
    )
    .unwrap();
    assert!(solve_ep(&h, &SolverConfig::default()).is_err());
    assert!(solve_amp(&h, &SolverConfig::default()).is_err());
}

#[test]
fn hybrid_recovers_a_sparse_vector() {
    let (p, x) = bg_instance(8, 100, 200, 0.1, 30.0);
    let h = SblProblem::new(
        p.a.clone(),
        p.y.clone(),
        None,
        SblPrior::Hierarchical(HierarchicalGamma::default()),
    )
    .unwrap();
    let r = solve_hybrid(&h, &SolverConfig::default()).unwrap();
    let db = 10.0 * nmse(&r.x_hat, &x).unwrap().log10();
    assert!(db < -15.0, "NMSE {db} dB");
    assert!(r.epsilons.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.epsilons.iter().all(|e| *e > 0.0));
    assert_eq!(r.residuals.len(), r.iterations);
    assert!(r.alpha_hat.unwrap().iter().all(|v| *v > 0.0));
    assert!(r.lambda_hat.unwrap() > 0.0);
}

#[test]
fn invalid_configs_are_rejected() {
    let (p, _) = bg_instance(1, 5, 10, 0.1, 30.0);
    for cfg in [
        SolverConfig::default().with_damping(0.0),
        SolverConfig::default().with_damping(1.5),
        SolverConfig::default().with_max_iter(0),
        SolverConfig::default().with_tol(-1.0),
    ] {
        assert!(solve_ep(&p, &cfg).is_err());
    }
}

#[test]
fn nmse_examples() {
    let x = vec![c(1.0, 2.0), c(0.0, -1.0)];
    assert_eq!(nmse(&x, &x).unwrap(), 0.0);
    assert_eq!(nmse(&[c(0.0, 0.0); 2], &x).unwrap(), 1.0);
    let x2: Vec<C> = x.iter().map(|v| v * 2.0).collect();
    assert_eq!(nmse(&x2, &x).unwrap(), 1.0);
    assert_eq!(nmse(&x, &[c(0.0, 0.0); 2]), Err(Error::ZeroReference));
    assert_eq!(nmse_db(&[0.0f64]), NMSE_DB_FLOOR);
    assert!((nmse_db(&[1.0f64]) - 0.0).abs() < 1e-15);
    // linear mean before the logarithm
    assert!((nmse_db(&[0.1f64, 0.001]) - 10.0 * 0.0505f64.log10()).abs() < 1e-12);
}

#[test]
fn denoiser_examples() {
    let (m, v, _) = denoise_bg(1.0, 1.0, c(2.0, 0.0), 1.0).unwrap();
    assert!((m - c(1.0, 0.0)).norm() < 1e-15 && (v - 0.5).abs() < 1e-15);
    let (m, v, s) = denoise_bg(0.0, 1.0, c(2.0, 0.0), 1.0).unwrap();
    assert!(m.norm() == 0.0 && v == 0.0 && s == 0.0);
    let (m, v, _) = denoise_bg(0.5, 1.0, c(0.0, 0.0), 1.0).unwrap();
    assert!(m.norm() < 1e-15 && (v - 1.0 / 6.0).abs() < 1e-12);
    assert!(denoise_bg(0.5, 1.0, c(0.0, 0.0), 0.0).is_err());
}

#[test]
fn float32_solvers_run() {
    let a = CMatrix::<f32>::from_fn(4, 3, |i, j| {
        Complex::new((i * 3 + j) as f32 * 0.1 - 0.4, 0.05 * j as f32)
    });
    let y = vec![Complex::new(0.3f32, 0.0); 4];
    let p = SblProblem::known(
        a,
        y,
        10.0f32,
        GenericPrior::zero_mean_gaussian(vec![1.0f32; 3]).unwrap(),
    )
    .unwrap();
    let cfg = SolverConfig::<f32>::default().with_max_iter(50).with_tol(1e-5);
    for r in [solve_ep(&p, &cfg).unwrap(), solve_ep_variant(&p, &cfg).unwrap()] {
        assert!(r.x_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ep_and_variant_reach_mmse(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=8, lambda in 0.5f64..50.0) {
        let (a, y, alpha) = gaussian_system(seed, n, m, lambda);
        let (exact, _) = exact_mmse_gaussian(&a, &y, lambda, &alpha).unwrap();
        let p = SblProblem::known(a, y, lambda, GenericPrior::zero_mean_gaussian(alpha).unwrap()).unwrap();
        let cfg = tight().with_max_iter(100_000);
        // parallel undamped EP occasionally diverges on loopy instances;
        // whenever it settles it must settle on the MMSE
        let ep = solve_ep(&p, &cfg).unwrap();
        if ep.converged {
            prop_assert!(close_rel(&ep.x_hat, &exact, 1e-6), "ep {:?} vs {:?}", ep.x_hat, exact);
        }
        let damped = solve_ep(&p, &cfg.clone().with_damping(0.5)).unwrap();
        prop_assert!(close_rel(&damped.x_hat, &exact, 1e-6), "damped ep {:?} vs {:?}", damped.x_hat, exact);
        let var = solve_ep_variant(&p, &cfg).unwrap();
        prop_assert!(close_rel(&var.x_hat, &exact, 1e-6), "variant {:?} vs {:?}", var.x_hat, exact);
    }

    #[test]
    fn variances_and_nmse_are_nonnegative(seed in any::<u64>(), rho in 0.05f64..0.6) {
        let (p, x) = bg_instance(seed, 20, 40, rho, 20.0);
        let cfg = SolverConfig::default().with_max_iter(40);
        for r in [solve_ep(&p, &cfg).unwrap(), solve_ep_variant(&p, &cfg).unwrap(), solve_amp(&p, &cfg).unwrap()] {
            prop_assert!(r.var.iter().all(|v| *v >= 0.0));
            if x.iter().any(|v| v.norm() > 0.0) {
                prop_assert!(nmse(&r.x_hat, &x).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn gamma_z_nonnegative_with_positive_cavities(seed in any::<u64>()) {
        let (p, _) = bg_instance(seed, 15, 30, 0.2, 20.0);
        let mut cfg = SolverConfig::default().with_max_iter(10);
        cfg.record_trajectory = true;
        for s in solve_ep(&p, &cfg).unwrap().trajectory {
            for n in 0..15 {
                if s.tau[n * 30..(n + 1) * 30].iter().all(|t| *t > 0.0) {
                    prop_assert!(s.gamma_z[n] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn denoiser_matches_quadrature(
        rho in 0.01f64..0.99,
        v0 in 0.1f64..10.0,
        re in -3.0f64..3.0,
        im in -3.0f64..3.0,
        tau in 0.01f64..10.0,
    ) {
        let mu = Complex::new(re, im);
        let (m, v, _) = denoise_bg(rho, v0, mu, tau).unwrap();
        let (mq, vq, _) = denoise_bg_quadrature(rho, v0, mu, tau).unwrap();
        prop_assert!((m - mq).norm() < 1e-8, "{m} vs {mq}");
        prop_assert!((v - vq).abs() < 1e-8, "{v} vs {vq}");
    }
}
