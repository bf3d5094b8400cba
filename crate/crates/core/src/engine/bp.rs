//! Stand-alone sum-product rules.
//!
//! [`PlainBp`] runs parallel sum-product directly on the factor tables,
//! without partitions or block terms. It is the reference the block engine
//! must reproduce when every partition is trivial.

use super::block::{self, BlockFactor};
use super::Payload;
use crate::graph::{FactorGraph, FactorId, FactorKind, VarId};
use crate::{Error, Real, Result};

fn factor_table<T: Real>(g: &FactorGraph<T>, a: FactorId) -> Result<&[T]> {
    match &g.factor(a).kind {
        FactorKind::Table(t) => Ok(t),
        _ => Err(Error::InvalidGraph(format!(
            "factor `{}` is not a table",
            g.factor(a).name
        ))),
    }
}

fn arg_states<T: Real>(g: &FactorGraph<T>, a: FactorId) -> Vec<usize> {
    g.factor(a)
        .args
        .iter()
        .map(|i| g.variable(*i).domain.states().unwrap_or(0))
        .collect()
}

fn sum_product<T: Real>(table: &[T], states: &[usize], incoming: &[&[T]], target: usize) -> Result<Vec<T>> {
    let mut out = vec![T::zero(); states[target]];
    block::for_each_config(states, |x, idx| {
        let mut w = table[idx];
        for (k, xk) in x.iter().enumerate() {
            if k != target {
                w *= incoming[k][*xk];
            }
        }
        out[x[target]] += w;
    });
    block::normalize(out)
}

/// `m_{a→i} ∝ Σ_{x_a∖i} f_a Π_{i′≠i} n_{i′→a}`.
///
/// `incoming` holds one message per argument of `a`; the entry for `i` is
/// ignored.
pub fn bp_factor_to_variable<T: Real>(
    g: &FactorGraph<T>,
    a: FactorId,
    i: VarId,
    incoming: &[Payload<T>],
) -> Result<Payload<T>> {
    let f = g.factor(a);
    let k =
        f.args.iter().position(|x| *x == i).ok_or_else(|| {
            Error::InvalidGraph(format!("`{}` is not an argument of `{}`", g.variable(i).name, f.name))
        })?;
    if incoming.len() != f.args.len() {
        return Err(Error::Dimension(format!(
            "{} incoming messages for {} arguments",
            incoming.len(),
            f.args.len()
        )));
    }
    match block::static_block_factor(g, a)? {
        BlockFactor::Table(t) => {
            let tabs = incoming
                .iter()
                .map(|p| match p {
                    Payload::Table(t) => Ok(t.as_slice()),
                    _ => Err(Error::Dimension("table factor with a non-table message".into())),
                })
                .collect::<Result<Vec<_>>>()?;
            sum_product(&t, &arg_states(g, a), &tabs, k).map(Payload::Table)
        }
        BlockFactor::Density(d) => Ok(Payload::Density(d)),
        BlockFactor::Exponent(c) => Ok(Payload::Exponent(c)),
        bf @ BlockFactor::Linear(_) => {
            let refs: Vec<&Payload<T>> = incoming.iter().collect();
            block::send(g, a, 0, k, &bf, &refs)
        }
        BlockFactor::Prior { .. } | BlockFactor::Unit => Err(Error::IntractableMarginalization {
            factor: f.name.clone(),
            reason: "the marginal leaves the exponential family; use a moment-matching constraint".into(),
        }),
    }
}

/// `n_{i→a} = Π_{a′≠a} m_{a′→i}`; flat when `a` is the only neighbour.
pub fn variable_to_factor<T: Real>(
    g: &FactorGraph<T>,
    i: VarId,
    a: FactorId,
    incoming: &[(FactorId, Payload<T>)],
) -> Result<Payload<T>> {
    let mut acc = Payload::flat(g, i);
    for (b, m) in incoming {
        if *b != a {
            acc = acc.multiply(m)?;
        }
    }
    Ok(acc)
}

/// Parallel sum-product on a discrete graph.
#[derive(Debug, Clone)]
pub struct PlainBp<'g, T: Real> {
    g: &'g FactorGraph<T>,
    m: Vec<Vec<T>>,
    n: Vec<Vec<T>>,
}

impl<'g, T: Real> PlainBp<'g, T> {
    pub fn new(g: &'g FactorGraph<T>) -> Result<Self> {
        if !g.is_discrete() {
            return Err(Error::InvalidGraph("plain BP needs a discrete graph".into()));
        }
        for a in 0..g.num_factors() {
            factor_table(g, a)?;
        }
        let flat: Vec<Vec<T>> = (0..g.num_edges())
            .map(|e| {
                let k = g.variable(g.edge(e).2).domain.states().unwrap_or(1);
                vec![T::from_usize_lossy(k).recip(); k]
            })
            .collect();
        Ok(Self {
            g,
            m: flat.clone(),
            n: flat,
        })
    }

    /// Factor → variable messages by edge.
    pub fn messages(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn step(&mut self) -> Result<()> {
        let g = self.g;
        let mut next = Vec::with_capacity(self.m.len());
        for a in 0..g.num_factors() {
            let t = factor_table(g, a)?;
            let st = arg_states(g, a);
            let incoming: Vec<&[T]> = (0..st.len()).map(|k| self.n[g.edge_id(a, k)].as_slice()).collect();
            for k in 0..st.len() {
                next.push(sum_product(t, &st, &incoming, k)?);
            }
        }
        self.m = next;
        for e in 0..self.n.len() {
            let i = g.edge(e).2;
            let k = self.m[e].len();
            let mut acc = vec![T::from_usize_lossy(k).recip(); k];
            for (a, kk) in g.neighbors(i) {
                let other = g.edge_id(*a, *kk);
                if other != e {
                    for (x, y) in acc.iter_mut().zip(&self.m[other]) {
                        *x *= *y;
                    }
                    acc = block::normalize(acc)?;
                }
            }
            self.n[e] = acc;
        }
        Ok(())
    }

    /// Normalized `Π_a m_{a→i}`.
    pub fn marginal(&self, i: VarId) -> Result<Vec<T>> {
        let k = self.g.variable(i).domain.states().unwrap_or(1);
        let mut acc = vec![T::one(); k];
        for (a, kk) in self.g.neighbors(i) {
            for (x, y) in acc.iter_mut().zip(&self.m[self.g.edge_id(*a, *kk)]) {
                *x *= *y;
            }
        }
        block::normalize(acc)
    }
}
