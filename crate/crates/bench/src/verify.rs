use std::fmt;
use std::str::FromStr;

use bethe_mp::bethe::{
    bethe_free_energy, brute_force_log_z, brute_force_marginals, product_joint, variational_free_energy, vmp_residual,
    BetheBeliefSet,
};
use bethe_mp::engine::bp::PlainBp;
use bethe_mp::engine::{run, Beliefs, Engine, Schedule};
use bethe_mp::graph::random::{random_loopy, random_tree};
use bethe_mp::graph::GraphBuilder;
use bethe_mp::sbl::{
    denoise_bg, denoise_bg_quadrature, exact_mmse_gaussian, solve_amp, solve_ep, solve_ep_variant, FaultInjection,
    SblPrior, SblState,
};
use bethe_mp::{Config, Graph, Prior, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{gaussian_instance, generate_instance, InstanceSpec};
use crate::sweep::DEFAULT_EP_DAMPING;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// BP on random trees against enumeration.
    Tree,
    /// Variational free energy along coordinate updates.
    Vmp,
    /// The hybrid engine's BP and VMP limits.
    Hybrid,
    /// EP solvers against the exact Gaussian posterior.
    Mmse,
    /// Variant with self-terms dropped against AMP.
    Delta,
    /// Bernoulli-Gaussian denoiser against quadrature.
    Denoiser,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Tree,
        Suite::Vmp,
        Suite::Hybrid,
        Suite::Mmse,
        Suite::Delta,
        Suite::Denoiser,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Tree => "tree",
            Suite::Vmp => "vmp",
            Suite::Hybrid => "hybrid",
            Suite::Mmse => "mmse",
            Suite::Delta => "delta",
            Suite::Denoiser => "denoiser",
        }
    }
}

impl FromStr for Suite {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenchError::UnknownSuite(s.to_owned()))
    }
}

/// One measured quantity of a suite.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest error seen; infinite if a case errored.
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(label: &'static str, tolerance: f64) -> Self {
        Self {
            label,
            cases: 0,
            failures: 0,
            worst: 0.0,
            tolerance,
        }
    }

    /// Records one case; `None` is an error inside the case.
    fn record(&mut self, err: Option<f64>) {
        self.cases += 1;
        let e = err.unwrap_or(f64::INFINITY);
        if e.is_nan() || e.is_infinite() || e.abs() > self.tolerance {
            self.failures += 1;
        }
        self.worst = if e.is_nan() { f64::INFINITY } else { self.worst.max(e) };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0 && c.cases > 0)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<9}{}",
            self.suite.name(),
            if self.passed() { "PASS" } else { "FAIL" }
        )?;
        for c in &self.checks {
            write!(
                f,
                "\n  {:<34}{:>5} cases  {:>3} failed  worst {:.2e}  tol {:.0e}",
                c.label, c.cases, c.failures, c.worst, c.tolerance
            )?;
        }
        Ok(())
    }
}

pub fn run_suite(suite: Suite, fault: Option<FaultInjection>) -> SuiteReport {
    let checks = match suite {
        Suite::Tree => tree(),
        Suite::Vmp => vmp(),
        Suite::Hybrid => hybrid(),
        Suite::Mmse => mmse(fault),
        Suite::Delta => delta(fault),
        Suite::Denoiser => denoiser(),
    };
    SuiteReport { suite, checks }
}

/// The same graph with every factor fully factorized.
pub fn fully_factorized(g: &Graph) -> bethe_mp::Result<Graph> {
    let mut b = GraphBuilder::new();
    for v in g.variables() {
        b.variable(v.name.clone(), v.domain);
    }
    for f in g.factors() {
        let a = b.factor(f.name.clone(), &f.args, f.kind.clone());
        b.fully_factorize(a);
    }
    b.build()
}

pub fn tables(b: &Beliefs<f64>) -> Option<Vec<Vec<f64>>> {
    b.variables.iter().map(|v| v.table().map(<[f64]>::to_vec)).collect()
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `max |a − b| / max |b|`.
pub fn relative_gap(a: &[C64], b: &[C64]) -> f64 {
    let scale = b.iter().fold(1e-300f64, |acc, v| acc.max(v.norm()));
    a.iter().zip(b).fold(0f64, |acc, (x, y)| acc.max((x - y).norm())) / scale
}

fn tree() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut marg = Check::new("BP marginals vs enumeration", 1e-10);
    let mut energy = Check::new("F_B at the fixed point + ln Z", 1e-10);
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let g: Graph = random_tree(&mut rng, n, 4);
        let case = || -> bethe_mp::Result<Option<(f64, f64)>> {
            let out = run(&g, Schedule::default())?;
            let Some(t) = tables(&out.beliefs).filter(|_| out.converged) else {
                return Ok(None);
            };
            let set = BetheBeliefSet::from_beliefs(&g, &out.beliefs)?;
            let fb = bethe_free_energy(&set, &g)? + brute_force_log_z(&g)?;
            Ok(Some((max_gap(&t, &brute_force_marginals(&g)?), fb.abs())))
        };
        let r = case().ok().flatten();
        marg.record(r.map(|v| v.0));
        energy.record(r.map(|v| v.1));
    }
    vec![marg, energy]
}

fn vmp() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut check = Check::new("F(b) increase per coordinate step", 1e-9);
    for _ in 0..100 {
        let (n, extra) = (rng.random_range(2..=5), rng.random_range(0..3));
        let base: Graph = random_loopy(&mut rng, n, 3, extra);
        let case = || -> bethe_mp::Result<f64> {
            let g = fully_factorized(&base)?;
            let mut e = Engine::new(&g, Schedule::sequential())?;
            let energy = |e: &Engine<f64>| -> bethe_mp::Result<f64> {
                let b = tables(&e.beliefs()?).ok_or(bethe_mp::Error::InvalidGraph("continuous belief".into()))?;
                variational_free_energy(&product_joint(&g, &b)?, &g)
            };
            let mut last = energy(&e)?;
            let mut worst = 0f64;
            for _ in 0..10 {
                for i in 0..g.num_variables() {
                    e.update_variable(i)?;
                    let now = energy(&e)?;
                    worst = worst.max(now - last);
                    last = now;
                }
            }
            Ok(worst)
        };
        check.record(case().ok());
    }
    vec![check]
}

fn hybrid() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut bp = Check::new("trivial partitions vs plain BP", 1e-12);
    let mut vmp = Check::new("full factorization VMP residual", 1e-9);
    for _ in 0..50 {
        let (n, extra) = (rng.random_range(2..=7), rng.random_range(0..4));
        let g: Graph = random_loopy(&mut rng, n, 3, extra);
        let case = || -> bethe_mp::Result<f64> {
            let mut e = Engine::new(&g, Schedule::default())?;
            let mut p = PlainBp::new(&g)?;
            let mut worst = 0f64;
            for _ in 0..15 {
                e.step()?;
                p.step()?;
                for (a, b) in e.to_variable().iter().zip(p.messages()) {
                    for (x, y) in a.params().iter().zip(b) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
            Ok(worst)
        };
        bp.record(case().ok());
    }
    for _ in 0..50 {
        let (n, extra) = (rng.random_range(2..=6), rng.random_range(0..3));
        let base: Graph = random_loopy(&mut rng, n, 3, extra);
        let case = || -> bethe_mp::Result<Option<f64>> {
            let g = fully_factorized(&base)?;
            let schedule = Schedule {
                max_rounds: Some(2000),
                tolerance: 1e-13,
                ..Schedule::sequential()
            };
            let out = run(&g, schedule)?;
            match tables(&out.beliefs).filter(|_| out.converged) {
                Some(t) => Ok(Some(vmp_residual(&g, &t)?)),
                None => Ok(None),
            }
        };
        vmp.record(case().ok().flatten());
    }
    vec![bp, vmp]
}

/// Configuration of the MMSE comparisons: tight enough that the 1e-6 gap
/// measures the fixed point rather than the stopping rule.
pub fn mmse_config(fault: Option<FaultInjection>) -> Config {
    Config {
        fault,
        ..Config::default().with_max_iter(100_000).with_tol(1e-13)
    }
}

fn mmse(fault: Option<FaultInjection>) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut damped = Check::new("ep_damped vs exact MMSE", 1e-6);
    let mut variant = Check::new("ep_variant vs exact MMSE", 1e-6);
    let mut plain = Check::new("ep (converged runs) vs exact MMSE", 1e-6);
    let cfg = mmse_config(fault);
    for _ in 0..100 {
        let (n, m) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let Ok(p) = gaussian_instance(&mut rng, n, m) else {
            damped.record(None);
            continue;
        };
        let (SblPrior::Known(Prior::ZeroMeanGaussianVec { alpha }), Some(lambda)) = (&p.prior, p.lambda) else {
            unreachable!("gaussian_instance builds a known Gaussian model")
        };
        let Ok((exact, _)) = exact_mmse_gaussian(&p.a, &p.y, lambda, alpha) else {
            damped.record(None);
            continue;
        };
        let gap = |r: bethe_mp::Result<bethe_mp::Solution>| r.ok().map(|r| relative_gap(&r.x_hat, &exact));
        damped.record(gap(solve_ep(&p, &cfg.clone().with_damping(DEFAULT_EP_DAMPING))));
        variant.record(gap(solve_ep_variant(&p, &cfg)));
        if let Ok(r) = solve_ep(&p, &cfg) {
            if r.converged {
                plain.record(Some(relative_gap(&r.x_hat, &exact)));
            }
        }
    }
    vec![damped, variant, plain]
}

/// Largest relative difference between two recorded variant/AMP states.
pub fn state_gap(s: &SblState<f64>, t: &SblState<f64>) -> f64 {
    let rel = |u: f64, v: f64| (u - v).abs() / u.abs().max(v.abs()).max(1e-300);
    let relc = |u: C64, v: C64| (u - v).norm() / u.norm().max(v.norm()).max(1e-300);
    let mut worst = 0f64;
    for (xs, ys) in [
        (&s.tau_ext, &t.tau_ext),
        (&s.gamma_z, &t.gamma_z),
        (&s.tau0, &t.tau0),
        (&s.var, &t.var),
    ] {
        worst = xs.iter().zip(ys.iter()).fold(worst, |w, (u, v)| w.max(rel(*u, *v)));
        if xs.len() != ys.len() {
            return f64::INFINITY;
        }
    }
    for (xs, ys) in [
        (&s.beta, &t.beta),
        (&s.mu_z, &t.mu_z),
        (&s.mu_x, &t.mu_x),
        (&s.mean, &t.mean),
    ] {
        worst = xs.iter().zip(ys.iter()).fold(worst, |w, (u, v)| w.max(relc(*u, *v)));
        if xs.len() != ys.len() {
            return f64::INFINITY;
        }
    }
    worst
}

fn delta(fault: Option<FaultInjection>) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut check = Check::new("variant without self-terms vs AMP", 1e-12);
    for trial in 0..20 {
        let spec = InstanceSpec {
            n: 40,
            m: 80,
            rho: rng.random_range(0.05..0.3),
            snr_db: rng.random_range(10.0..40.0),
            seed: 15,
            trial,
            ..InstanceSpec::default()
        };
        let case = || -> Option<f64> {
            let inst = generate_instance(&spec).ok()?;
            let mut cfg = Config {
                record_trajectory: true,
                fault,
                ..Config::default().with_max_iter(25).with_tol(0.0)
            };
            let amp = solve_amp(&inst.problem, &cfg).ok()?;
            cfg.drop_self_terms = true;
            let var = solve_ep_variant(&inst.problem, &cfg).ok()?;
            if amp.trajectory.len() != var.trajectory.len() {
                return None;
            }
            Some(
                amp.trajectory
                    .iter()
                    .zip(&var.trajectory)
                    .fold(0f64, |w, (s, t)| w.max(state_gap(s, t))),
            )
        };
        check.record(case());
    }
    vec![check]
}

fn denoiser() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut mean = Check::new("posterior mean vs quadrature", 1e-8);
    let mut var = Check::new("posterior variance vs quadrature", 1e-8);
    for _ in 0..1000 {
        let rho = rng.random_range(0.01..0.99);
        let v0 = rng.random_range(0.1..10.0);
        let mu = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let tau = rng.random_range(0.01..10.0);
        match (denoise_bg(rho, v0, mu, tau), denoise_bg_quadrature(rho, v0, mu, tau)) {
            (Ok((m, v, _)), Ok((mq, vq, _))) => {
                mean.record(Some((m - mq).norm()));
                var.record(Some((v - vq).abs()));
            }
            _ => {
                mean.record(None);
                var.record(None);
            }
        }
    }
    vec![mean, var]
}
