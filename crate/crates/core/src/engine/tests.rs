use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bp::{bp_factor_to_variable, variable_to_factor, PlainBp};
use super::*;
use crate::bethe::{brute_force_marginals, product_joint, variational_free_energy, vmp_residual};
use crate::expfam::GenericPrior;
use crate::graph::random::{random_loopy, random_tree};
use crate::graph::{EdgeConstraint, FactorKind, GraphBuilder, LogDensity};
use crate::sbl::{exact_mmse_gaussian, CMatrix};
use num_complex::Complex;

fn chain() -> FactorGraph<f64> {
    let mut b = GraphBuilder::new();
    let x: Vec<_> = (0..3)
        .map(|i| b.variable(format!("x{i}"), Domain::Discrete(2)))
        .collect();
    b.factor("u0", &[x[0]], FactorKind::Table(vec![0.6, 0.4]));
    b.factor("p01", &[x[0], x[1]], FactorKind::Table(vec![0.9, 0.1, 0.1, 0.9]));
    b.factor("p12", &[x[1], x[2]], FactorKind::Table(vec![0.3, 0.7, 0.8, 0.2]));
    b.build().unwrap()
}

fn tables(b: &Beliefs<f64>) -> Vec<Vec<f64>> {
    b.variables.iter().map(|v| v.table().unwrap().to_vec()).collect()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

fn fully_factorized(g: &FactorGraph<f64>) -> FactorGraph<f64> {
    let mut b = GraphBuilder::new();
    for v in g.variables() {
        b.variable(v.name.clone(), v.domain);
    }
    for f in g.factors() {
        let a = b.factor(f.name.clone(), &f.args, f.kind.clone());
        b.fully_factorize(a);
    }
    b.build().unwrap()
}

#[test]
fn factor_to_variable_example() {
    let g = chain();
    let incoming = vec![Payload::Table(vec![0.6, 0.4]), Payload::Table(vec![0.5, 0.5])];
    let m = bp_factor_to_variable(&g, 1, 1, &incoming).unwrap();
    let t = m.params();
    assert!((t[0] - 0.58).abs() < 1e-15 && (t[1] - 0.42).abs() < 1e-15);
    let flat = vec![Payload::Table(vec![0.5, 0.5]); 2];
    assert_eq!(
        bp_factor_to_variable(&g, 1, 1, &flat).unwrap(),
        Payload::Table(vec![0.5, 0.5])
    );
    let unary = bp_factor_to_variable(&g, 0, 0, &[Payload::Table(vec![0.5, 0.5])]).unwrap();
    assert_eq!(unary, Payload::Table(vec![0.6, 0.4]));
}

#[test]
fn variable_to_factor_examples() {
    let g = chain();
    let n = variable_to_factor(&g, 1, 2, &[(1, Payload::Table(vec![0.58, 0.42]))]).unwrap();
    assert_eq!(n, Payload::Table(vec![0.58, 0.42]));
    assert_eq!(
        variable_to_factor(&g, 2, 2, &[]).unwrap(),
        Payload::Table(vec![0.5, 0.5])
    );
    let two = [(0, Payload::Table(vec![0.9, 0.1])), (1, Payload::Table(vec![0.5, 0.5]))];
    let n = variable_to_factor(&g, 0, 5, &two).unwrap();
    let t = n.params();
    assert!((t[0] - 0.9).abs() < 1e-15 && (t[1] - 0.1).abs() < 1e-15);
}

#[test]
fn chain_is_exact_after_two_sequential_sweeps() {
    let g = chain();
    let exact = brute_force_marginals(&g).unwrap();
    let mut e = Engine::new(&g, Schedule::sequential()).unwrap();
    e.step().unwrap();
    e.step().unwrap();
    assert!(max_gap(&tables(&e.beliefs().unwrap()), &exact) < 1e-14);
    let out = run(&g, Schedule::default()).unwrap();
    assert!(out.converged);
    assert!(max_gap(&tables(&out.beliefs), &exact) < 1e-12);
}

#[test]
fn full_statistic_moment_matching_equals_marginalization() {
    let g = chain();
    let mut b = GraphBuilder::new();
    for v in g.variables() {
        b.variable(v.name.clone(), v.domain);
    }
    for f in g.factors() {
        b.factor(f.name.clone(), &f.args, f.kind.clone());
    }
    for i in 0..3 {
        b.constraint(i, EdgeConstraint::MomentMatching(SufficientStatistic::Categorical(2)));
    }
    let mm = b.build().unwrap();
    let a = run(&g, Schedule::default()).unwrap();
    let m = run(&mm, Schedule::default()).unwrap();
    assert!(max_gap(&tables(&a.beliefs), &tables(&m.beliefs)) < 1e-12);
}

#[test]
fn unit_damping_is_the_undamped_trace() {
    let g: FactorGraph<f64> = random_loopy(&mut ChaCha8Rng::seed_from_u64(3), 6, 3, 3);
    let schedule = Schedule {
        trace: true,
        max_rounds: Some(20),
        ..Schedule::default()
    };
    let a = run(&g, schedule.clone()).unwrap();
    let b = run(
        &g,
        Schedule {
            damping: 1.0,
            ..schedule.clone()
        },
    )
    .unwrap();
    assert_eq!(a.trace, b.trace);
    let c = run(
        &g,
        Schedule {
            damping: 0.5,
            ..schedule
        },
    )
    .unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn trace_lines_have_round_edge_direction() {
    let g = chain();
    let out = run(
        &g,
        Schedule {
            trace: true,
            max_rounds: Some(1),
            ..Schedule::default()
        },
    )
    .unwrap();
    let text = format_trace(&out.trace);
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("1,0,f2v,"), "{first}");
    assert!(text.lines().any(|l| l.contains(",v2f,")));
}

#[test]
fn invalid_schedules_are_rejected() {
    let g = chain();
    for s in [
        Schedule {
            damping: 0.0,
            ..Schedule::default()
        },
        Schedule {
            tolerance: 0.0,
            ..Schedule::default()
        },
        Schedule {
            order: Order::Custom(vec![Action::ToVariable(99)]),
            ..Schedule::default()
        },
    ] {
        assert!(Engine::new(&g, s).is_err());
    }
}

#[test]
fn custom_order_runs_the_listed_actions() {
    let g = chain();
    // leaves to root, then root to leaves
    let mut acts = Vec::new();
    for e in 0..g.num_edges() {
        acts.push(Action::ToVariable(e));
        acts.push(Action::ToBlock(e));
    }
    let out = run(
        &g,
        Schedule {
            order: Order::Custom(acts),
            ..Schedule::default()
        },
    )
    .unwrap();
    assert!(out.converged);
    assert!(max_gap(&tables(&out.beliefs), &brute_force_marginals(&g).unwrap()) < 1e-12);
}

#[test]
fn scaled_messages_give_the_same_beliefs() {
    let g: FactorGraph<f64> = random_tree(&mut ChaCha8Rng::seed_from_u64(9), 5, 3);
    let mut e = Engine::new(&g, Schedule::default()).unwrap();
    e.step().unwrap();
    let before = tables(&e.beliefs().unwrap());
    let incoming: Vec<(FactorId, Payload<f64>)> = g
        .neighbors(0)
        .iter()
        .map(|(a, k)| {
            let t = e.to_variable()[g.edge_id(*a, *k)]
                .params()
                .iter()
                .map(|x| x * 7.5)
                .collect();
            (*a, Payload::Table(t))
        })
        .collect();
    let mut prod = vec![1.0; before[0].len()];
    for (_, m) in &incoming {
        for (p, x) in prod.iter_mut().zip(m.params()) {
            *p *= x;
        }
    }
    let s: f64 = prod.iter().sum();
    for (p, b) in prod.iter().zip(&before[0]) {
        assert!((p / s - b).abs() < 1e-14);
    }
}

#[test]
fn ep_send_examples() {
    let prior = GenericPrior::bernoulli_gaussian(0.5f64, 1.0).unwrap();
    let flat = ExpFamilyDensity::flat(SufficientStatistic::ComplexGaussian);
    let tilted = prior.tilted(0, None).unwrap();
    let m = ep_project_send(SufficientStatistic::ComplexGaussian, &tilted, &flat).unwrap();
    let (mean, var) = m.complex_mean_var().unwrap();
    assert!(mean.norm() < 1e-15 && (var - 0.5).abs() < 1e-15);

    let t = ExpFamilyDensity::complex_gaussian(Complex::new(0.4f64, 0.0), 0.3);
    let cav = ExpFamilyDensity::complex_gaussian(Complex::new(0.2, 0.0), 1.0);
    let m = ep_project_send(SufficientStatistic::ComplexGaussian, &t, &cav).unwrap();
    let (mean, var) = m.complex_mean_var().unwrap();
    assert!((1.0 / var - (1.0 / 0.3 - 1.0)).abs() < 1e-12);
    assert!((mean.re - (0.4 / 0.3 - 0.2) / (1.0 / 0.3 - 1.0)).abs() < 1e-12);
}

#[test]
fn scalar_gaussian_model() {
    let mut b = GraphBuilder::<f64>::new();
    let x = b.variable("x", Domain::Continuous(SufficientStatistic::ComplexGaussian));
    b.factor(
        "prior",
        &[x],
        FactorKind::LogDensity(LogDensity::exp_family(ExpFamilyDensity::complex_gaussian(
            Complex::new(0.0, 0.0),
            1.0,
        ))),
    );
    let lik = b.factor(
        "lik",
        &[x],
        FactorKind::GaussianLikelihood {
            y: Complex::new(2.0, 0.0),
            precision: Some(1.0),
        },
    );
    let g = b.build().unwrap();
    let out = run(&g, Schedule::default()).unwrap();
    let msg = match &out.beliefs.variables[0] {
        Belief::Density(_) => run_engine_message(&g, lik),
        other => panic!("{other:?}"),
    };
    let (mm, mv) = msg.complex_mean_var().unwrap();
    assert!((mm - Complex::new(2.0, 0.0)).norm() < 1e-15 && (mv - 1.0).abs() < 1e-15);
    let (m, v) = complex_summary(&out.beliefs.variables[0]).unwrap();
    assert!((m - Complex::new(1.0, 0.0)).norm() < 1e-15 && (v - 0.5).abs() < 1e-15);
}

fn run_engine_message(g: &FactorGraph<f64>, a: FactorId) -> ExpFamilyDensity<f64> {
    let mut e = Engine::new(g, Schedule::default()).unwrap();
    e.run().unwrap();
    match &e.to_variable()[g.edge_id(a, 0)] {
        Payload::Density(d) => d.clone(),
        other => panic!("{other:?}"),
    }
}

/// `y = Ax + w` with `z = Ax` as delta factors and EP on the prior edges.
fn linear_model(a: &CMatrix<f64>, y: &[Complex<f64>], lambda: f64, prior: &GenericPrior<f64>) -> FactorGraph<f64> {
    let cg = Domain::Continuous(SufficientStatistic::ComplexGaussian);
    let mut b = GraphBuilder::new();
    let xs: Vec<_> = (0..a.cols()).map(|m| b.variable(format!("x{m}"), cg)).collect();
    for (m, &x) in xs.iter().enumerate() {
        b.factor(
            format!("p{m}"),
            &[x],
            FactorKind::LogDensity(LogDensity::prior(prior.clone(), m)),
        );
        b.constraint(x, EdgeConstraint::MomentMatching(SufficientStatistic::ComplexGaussian));
    }
    for (n, yn) in y.iter().enumerate() {
        let z = b.variable(format!("z{n}"), cg);
        let mut args = vec![z];
        args.extend(&xs);
        b.factor(format!("d{n}"), &args, FactorKind::LinearDelta(a.row(n).to_vec()));
        b.factor(
            format!("l{n}"),
            &[z],
            FactorKind::GaussianLikelihood {
                y: *yn,
                precision: Some(lambda),
            },
        );
    }
    b.build().unwrap()
}

#[test]
fn gaussian_linear_model_reaches_mmse_means() {
    let a = CMatrix::from_fn(3, 2, |i, j| {
        Complex::new(0.3 * i as f64 - 0.2 * j as f64 + 0.4, 0.1 * (i + j) as f64)
    });
    let y = vec![Complex::new(0.5, -0.1), Complex::new(1.0, 0.3), Complex::new(-0.2, 0.6)];
    let prior = GenericPrior::zero_mean_gaussian(vec![1.0, 2.0]).unwrap();
    let g = linear_model(&a, &y, 4.0, &prior);
    let out = run(
        &g,
        Schedule {
            max_rounds: Some(2000),
            tolerance: 1e-13,
            damping: 0.5,
            ..Schedule::default()
        },
    )
    .unwrap();
    assert!(out.converged);
    let (exact, _) = exact_mmse_gaussian(&a, &y, 4.0, &[1.0, 2.0]).unwrap();
    for (m, ex) in exact.iter().enumerate() {
        let (mean, _) = complex_summary(&out.beliefs.variables[m]).unwrap();
        assert!((mean - ex).norm() < 1e-8, "{mean} vs {ex}");
    }
}

#[test]
fn variance_em_on_a_point_mass() {
    // y = x + w, x ~ CN(0, α), α by EM: the fixed point is α = |y|² − 1
    let mut b = GraphBuilder::<f64>::new();
    let x = b.variable("x", Domain::Continuous(SufficientStatistic::ComplexGaussian));
    let al = b.variable("alpha", Domain::Continuous(SufficientStatistic::Gamma));
    let pv = b.factor(
        "prior",
        &[x, al],
        FactorKind::LogDensity(LogDensity::gaussian_variance()),
    );
    b.fully_factorize(pv);
    b.point_mass(al, 1.0);
    b.factor(
        "lik",
        &[x],
        FactorKind::GaussianLikelihood {
            y: Complex::new(2.0, 0.0),
            precision: Some(1.0),
        },
    );
    let g = b.build().unwrap();
    let out = run(
        &g,
        Schedule {
            max_rounds: Some(5000),
            tolerance: 1e-14,
            ..Schedule::sequential()
        },
    )
    .unwrap();
    assert!(out.converged);
    match out.beliefs.variables[al] {
        Belief::PointMass(a) => assert!((a - 3.0).abs() < 1e-9, "α = {a}"),
        ref other => panic!("{other:?}"),
    }
}

#[test]
fn non_conjugate_partition_is_reported() {
    let mut b = GraphBuilder::<f64>::new();
    let cg = Domain::Continuous(SufficientStatistic::ComplexGaussian);
    let z = b.variable("z", cg);
    let x = b.variable("x", cg);
    let d = b.factor("d", &[z, x], FactorKind::LinearDelta(vec![Complex::new(1.0, 0.0)]));
    b.fully_factorize(d);
    let g = b.build().unwrap();
    assert!(matches!(
        Engine::new(&g, Schedule::default()),
        Err(Error::IntractableExpectation { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn trees_are_exact(seed in any::<u64>(), n in 1usize..=10, k in 2usize..=4) {
        let g: FactorGraph<f64> = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n, k);
        let out = run(&g, Schedule::default()).unwrap();
        prop_assert!(out.converged);
        prop_assert!(max_gap(&tables(&out.beliefs), &brute_force_marginals(&g).unwrap()) < 1e-10);
    }

    #[test]
    fn trivial_partitions_reproduce_plain_bp(seed in any::<u64>(), n in 2usize..=7, extra in 0usize..4) {
        let g: FactorGraph<f64> = random_loopy(&mut ChaCha8Rng::seed_from_u64(seed), n, 3, extra);
        let mut e = Engine::new(&g, Schedule::default()).unwrap();
        let mut p = PlainBp::new(&g).unwrap();
        for _ in 0..15 {
            e.step().unwrap();
            p.step().unwrap();
            for (a, b) in e.to_variable().iter().zip(p.messages()) {
                for (x, y) in a.params().iter().zip(b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_factorization_reaches_a_vmp_fixed_point(seed in any::<u64>(), n in 2usize..=6, extra in 0usize..3) {
        let g = fully_factorized(&random_loopy(&mut ChaCha8Rng::seed_from_u64(seed), n, 3, extra));
        let out = run(&g, Schedule { max_rounds: Some(2000), tolerance: 1e-13, ..Schedule::sequential() }).unwrap();
        prop_assert!(out.converged);
        prop_assert!(vmp_residual(&g, &tables(&out.beliefs)).unwrap() < 1e-9);
    }

    #[test]
    fn vmp_coordinate_updates_never_raise_free_energy(seed in any::<u64>(), n in 2usize..=5, extra in 0usize..3) {
        let g = fully_factorized(&random_loopy(&mut ChaCha8Rng::seed_from_u64(seed), n, 3, extra));
        let mut e = Engine::new(&g, Schedule::sequential()).unwrap();
        let energy = |e: &Engine<f64>| {
            let b = tables(&e.beliefs().unwrap());
            variational_free_energy(&product_joint(&g, &b).unwrap(), &g).unwrap()
        };
        let mut last = energy(&e);
        for _ in 0..10 {
            for i in 0..g.num_variables() {
                e.update_variable(i).unwrap();
                let now = energy(&e);
                prop_assert!(now <= last + 1e-9, "{now} > {last}");
                last = now;
            }
        }
    }
}
