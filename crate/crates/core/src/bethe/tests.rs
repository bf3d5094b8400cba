use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::engine::{run, Engine, Schedule};
use crate::graph::random::{random_loopy, random_tree};
use crate::graph::{Domain, FactorKind, GraphBuilder};

fn graph(vars: &[usize], factors: &[(&[usize], Vec<f64>)]) -> FactorGraph<f64> {
    let mut b = GraphBuilder::new();
    for (i, k) in vars.iter().enumerate() {
        b.variable(format!("x{i}"), Domain::Discrete(*k));
    }
    for (a, (args, t)) in factors.iter().enumerate() {
        b.factor(format!("f{a}"), args, FactorKind::Table(t.clone()));
    }
    b.build().unwrap()
}

fn chain() -> FactorGraph<f64> {
    graph(&[2, 2], &[(&[0], vec![0.6, 0.4]), (&[0, 1], vec![0.9, 0.1, 0.1, 0.9])])
}

fn exact_set(g: &FactorGraph<f64>) -> BetheBeliefSet<f64> {
    BetheBeliefSet {
        factors: brute_force_factor_marginals(g).unwrap(),
        variables: brute_force_marginals(g).unwrap(),
    }
}

#[test]
fn enumeration_examples() {
    let g = chain();
    let m = brute_force_marginals(&g).unwrap();
    assert!((m[1][0] - 0.58).abs() < 1e-15 && (m[1][1] - 0.42).abs() < 1e-15);
    assert!(brute_force_log_z(&g).unwrap().abs() < 1e-15);

    let flat = graph(&[2], &[(&[0], vec![2.0, 2.0])]);
    assert_eq!(brute_force_marginals(&flat).unwrap(), vec![vec![0.5, 0.5]]);
    assert!((brute_force_log_z(&flat).unwrap() - 4f64.ln()).abs() < 1e-15);

    let indep = graph(&[2, 2], &[(&[0], vec![1.0, 1.0]), (&[1], vec![3.0, 1.0])]);
    let m = brute_force_marginals(&indep).unwrap();
    for (got, want) in m.iter().flatten().zip([0.5, 0.5, 0.75, 0.25]) {
        assert!((got - want).abs() < 1e-15);
    }
}

#[test]
fn space_bound_is_enforced() {
    let mut b = GraphBuilder::<f64>::new();
    for i in 0..7 {
        let v = b.variable(format!("x{i}"), Domain::Discrete(10));
        b.factor(format!("u{i}"), &[v], FactorKind::Table(vec![1.0; 10]));
    }
    let g = b.build().unwrap();
    assert!(matches!(brute_force_log_z(&g), Err(Error::SpaceTooLarge { .. })));
}

#[test]
fn variational_free_energy_examples() {
    let g = chain();
    let (p, _) = brute_force_joint(&g).unwrap();
    assert!(variational_free_energy(&p, &g).unwrap().abs() < 1e-15);

    let flat = graph(&[2], &[(&[0], vec![2.0, 2.0])]);
    assert!((variational_free_energy(&[0.5, 0.5], &flat).unwrap() + 4f64.ln()).abs() < 1e-15);
    assert!((variational_free_energy(&[1.0, 0.0], &flat).unwrap() + 2f64.ln()).abs() < 1e-15);
    assert!(variational_free_energy(&[0.6, 0.6], &flat).is_err());
}

#[test]
fn bethe_free_energy_examples() {
    let g = chain();
    assert!(bethe_free_energy(&exact_set(&g), &g).unwrap().abs() < 1e-15);
    let flat = graph(&[2], &[(&[0], vec![2.0, 2.0])]);
    assert!((bethe_free_energy(&exact_set(&flat), &flat).unwrap() + 4f64.ln()).abs() < 1e-15);
}

#[test]
fn bethe_formula_on_a_frustrated_cycle() {
    let xor = vec![0.1, 0.9, 0.9, 0.1];
    let g = graph(
        &[2, 2, 2],
        &[(&[0, 1], xor.clone()), (&[1, 2], xor.clone()), (&[2, 0], xor.clone())],
    );
    let set = BetheBeliefSet {
        factors: vec![vec![0.25; 4]; 3],
        variables: vec![vec![0.5; 2]; 3],
    };
    let fb = bethe_free_energy(&set, &g).unwrap();
    // each factor: Σ 0.25 ln(0.25/f); each variable has degree 2
    let mut expect = 0.0;
    for _ in 0..3 {
        expect += xor.iter().map(|f| 0.25 * (0.25f64 / f).ln()).sum::<f64>();
    }
    expect -= 3.0 * (2.0 * 0.5 * 0.5f64.ln());
    assert!((fb - expect).abs() < 1e-14);
}

#[test]
fn zero_beliefs_follow_the_convention() {
    let g = graph(&[2], &[(&[0], vec![1.0, 0.0])]);
    let set = BetheBeliefSet {
        factors: vec![vec![1.0, 0.0]],
        variables: vec![vec![1.0, 0.0]],
    };
    assert_eq!(bethe_free_energy(&set, &g).unwrap(), 0.0);
    assert_eq!(variational_free_energy(&[1.0, 0.0], &g).unwrap(), 0.0);
}

#[test]
fn residual_examples() {
    let g = chain();
    let mut e = Engine::new(&g, Schedule::default()).unwrap();
    let out = e.run().unwrap();
    let set = BetheBeliefSet::from_beliefs(&g, &out.beliefs).unwrap();
    assert!(fixed_point_residual(&g, &set, e.to_variable(), e.to_block()).unwrap() < 1e-10);
    assert!(set.consistency_gap(&g) < 1e-12);

    let mut noisy = set.clone();
    noisy.variables[1] = vec![0.58 + 0.1, 0.42 - 0.1];
    noisy.factors[1] = vec![0.54 + 0.1, 0.06 - 0.05, 0.04, 0.36 - 0.05];
    assert!(fixed_point_residual(&g, &noisy, e.to_variable(), e.to_block()).unwrap() > 0.01);

    let unary = graph(&[2, 3], &[(&[0], vec![1.0, 1.0]), (&[1], vec![2.0, 2.0, 2.0])]);
    let e = Engine::new(&unary, Schedule::default()).unwrap();
    let set = BetheBeliefSet {
        factors: vec![vec![0.5; 2], vec![1.0 / 3.0; 3]],
        variables: vec![vec![0.5; 2], vec![1.0 / 3.0; 3]],
    };
    assert!(fixed_point_residual(&unary, &set, e.to_variable(), e.to_block()).unwrap() < 1e-15);
}

/// A direction `u vᵀ` (Σu = Σv = 0) on one pairwise factor belief; it keeps
/// every marginal. Returns the factor index and the direction.
fn direction(g: &FactorGraph<f64>, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
    let pairs: Vec<usize> = (0..g.num_factors()).filter(|a| g.factor(*a).args.len() == 2).collect();
    let a = pairs[rng.random_range(0..pairs.len())];
    let args = &g.factor(a).args;
    let (ki, kj) = (
        g.variable(args[0]).domain.states().unwrap(),
        g.variable(args[1]).domain.states().unwrap(),
    );
    let centered = |rng: &mut ChaCha8Rng, k: usize| {
        let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / k as f64;
        v.into_iter().map(|x| x - mean).collect::<Vec<_>>()
    };
    let (u, v) = (centered(rng, ki), centered(rng, kj));
    (a, (0..ki * kj).map(|t| u[t / kj] * v[t % kj]).collect())
}

fn shifted(set: &BetheBeliefSet<f64>, a: usize, d: &[f64], delta: f64) -> BetheBeliefSet<f64> {
    let mut out = set.clone();
    for (b, x) in out.factors[a].iter_mut().zip(d) {
        *b += delta * x;
    }
    out
}

#[test]
fn bethe_free_energy_is_stationary_at_loopy_bp_fixed_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 5 {
        let g: FactorGraph<f64> = random_loopy(&mut rng, 5, 3, 3);
        let out = run(
            &g,
            Schedule {
                max_rounds: Some(2000),
                tolerance: 1e-14,
                ..Schedule::default()
            },
        )
        .unwrap();
        if !out.converged {
            continue;
        }
        checked += 1;
        let set = BetheBeliefSet::from_beliefs(&g, &out.beliefs).unwrap();
        let f0 = bethe_free_energy(&set, &g).unwrap();
        let delta = 1e-4;
        for _ in 0..50 {
            let (a, d) = direction(&g, &mut rng);
            let fp = bethe_free_energy(&shifted(&set, a, &d, delta), &g).unwrap() - f0;
            let fm = bethe_free_energy(&shifted(&set, a, &d, -delta), &g).unwrap() - f0;
            // odd part: gradient + cubic term of b ln b, up to a quintic remainder
            let terms = set.factors[a].iter().zip(&d);
            let cubic: f64 = terms.clone().map(|(b, x)| -(delta * x).powi(3) / (6.0 * b * b)).sum();
            let curvature: f64 = terms.map(|(b, x)| (delta * x).powi(2) / (2.0 * b)).sum();
            let first = 0.5 * (fp - fm) - cubic;
            let quintic: f64 = set.factors[a]
                .iter()
                .zip(&d)
                .map(|(b, x)| (delta * x).abs().powi(5) / (20.0 * b.powi(4)))
                .sum();
            assert!(first.abs() < 2.0 * quintic + 1e-12, "first-order change {first}");
            assert!((0.5 * (fp + fm) - curvature).abs() < 1e-2 * curvature + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bethe_equals_minus_log_z_on_trees(seed in any::<u64>(), n in 1usize..=8, k in 2usize..=4) {
        let g: FactorGraph<f64> = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n, k);
        let fb = bethe_free_energy(&exact_set(&g), &g).unwrap();
        prop_assert!((fb + brute_force_log_z(&g).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn gibbs_inequality(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: FactorGraph<f64> = random_loopy(&mut rng, 4, 3, 2);
        let (p, log_z) = brute_force_joint(&g).unwrap();
        let raw: Vec<f64> = p.iter().map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let b: Vec<f64> = raw.iter().map(|x| x / s).collect();
        prop_assert!(variational_free_energy(&b, &g).unwrap() >= -log_z - 1e-12);
        prop_assert!((variational_free_energy(&p, &g).unwrap() + log_z).abs() < 1e-12);
    }

    #[test]
    fn tree_fixed_points_have_zero_residual(seed in any::<u64>(), n in 1usize..=8) {
        let g: FactorGraph<f64> = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), n, 3);
        let mut e = Engine::new(&g, Schedule::default()).unwrap();
        let out = e.run().unwrap();
        let set = BetheBeliefSet::from_beliefs(&g, &out.beliefs).unwrap();
        prop_assert!(fixed_point_residual(&g, &set, e.to_variable(), e.to_block()).unwrap() < 1e-10);
        let fb = bethe_free_energy(&set, &g).unwrap();
        prop_assert!((fb + brute_force_log_z(&g).unwrap()).abs() < 1e-10);
    }
}
