//! Random discrete graphs for property tests and the verify suites.

use rand::Rng;

use super::{Domain, FactorGraph, FactorKind, GraphBuilder, VarId};
use crate::Real;

fn table<T: Real, R: Rng + ?Sized>(rng: &mut R, size: usize) -> Vec<T> {
    (0..size).map(|_| T::lit(rng.random_range(0.05..1.0))).collect()
}

/// A random factor tree over `n_vars` variables with 2..=`max_states` states.
///
/// Every variable gets a unary factor; the remaining factors are pairwise or
/// ternary, each introducing fresh variables next to one existing variable,
/// so the bipartite graph stays acyclic.
pub fn random_tree<T: Real, R: Rng + ?Sized>(rng: &mut R, n_vars: usize, max_states: usize) -> FactorGraph<T> {
    assert!(n_vars >= 1 && max_states >= 2);
    let mut b = GraphBuilder::new();
    let states: Vec<usize> = (0..n_vars).map(|_| rng.random_range(2..=max_states)).collect();
    let vars: Vec<VarId> = (0..n_vars)
        .map(|i| b.variable(format!("x{i}"), Domain::Discrete(states[i])))
        .collect();
    for &i in &vars {
        let t = table(rng, states[i]);
        b.factor(format!("u{i}"), &[i], FactorKind::Table(t));
    }
    let mut next = 1;
    let mut k = 0;
    while next < n_vars {
        let anchor = rng.random_range(0..next);
        let fresh = if next + 1 < n_vars && rng.random_bool(0.25) {
            2
        } else {
            1
        };
        let mut args = vec![vars[anchor]];
        args.extend((next..next + fresh).map(|j| vars[j]));
        next += fresh;
        let size = args.iter().map(|i| states[*i]).product();
        let t = table(rng, size);
        b.factor(format!("f{k}"), &args, FactorKind::Table(t));
        k += 1;
    }
    b.build().expect("generated tree is valid")
}

/// A random connected pairwise graph with `extra` additional edges on top of
/// a spanning tree (so loops appear whenever `extra > 0` and room allows).
pub fn random_loopy<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n_vars: usize,
    max_states: usize,
    extra: usize,
) -> FactorGraph<T> {
    assert!(n_vars >= 1 && max_states >= 2);
    let mut b = GraphBuilder::new();
    let states: Vec<usize> = (0..n_vars).map(|_| rng.random_range(2..=max_states)).collect();
    for (i, &s) in states.iter().enumerate() {
        b.variable(format!("x{i}"), Domain::Discrete(s));
        let t = table(rng, s);
        b.factor(format!("u{i}"), &[i], FactorKind::Table(t));
    }
    let mut edges = Vec::new();
    for j in 1..n_vars {
        edges.push((rng.random_range(0..j), j));
    }
    let max_edges = n_vars * (n_vars - 1) / 2;
    let mut tries = 0;
    while edges.len() < (n_vars - 1 + extra).min(max_edges) && tries < 100 * (extra + 1) {
        tries += 1;
        let i = rng.random_range(0..n_vars);
        let j = rng.random_range(0..n_vars);
        let e = (i.min(j), i.max(j));
        if i != j && !edges.contains(&e) {
            edges.push(e);
        }
    }
    for (k, (i, j)) in edges.into_iter().enumerate() {
        let t = table(rng, states[i] * states[j]);
        b.factor(format!("f{k}"), &[i, j], FactorKind::Table(t));
    }
    b.build().expect("generated graph is valid")
}
