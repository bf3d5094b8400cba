//! Free energies and exhaustive oracles for small discrete graphs.
//!
//! All quantities are in nats and use `0 ln 0 = 0`.

use crate::engine::{Belief, Beliefs, Payload};
use crate::graph::{FactorGraph, FactorKind, VarId};
use crate::{xlogx, xlogy_ratio, Error, Real, Result};

/// Largest joint assignment space the oracles will enumerate.
pub const MAX_STATES: u128 = 1_000_000;

/// The product space of all variables of a discrete graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentSpace {
    states: Vec<usize>,
    total: usize,
}

impl AssignmentSpace {
    pub fn new<T: Real>(g: &FactorGraph<T>) -> Result<Self> {
        let states = g
            .variables()
            .iter()
            .map(|v| {
                v.domain
                    .states()
                    .ok_or_else(|| Error::InvalidGraph(format!("`{}` is not discrete", v.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let total = states.iter().fold(1u128, |acc, s| acc.saturating_mul(*s as u128));
        if total > MAX_STATES {
            return Err(Error::SpaceTooLarge {
                states: total,
                bound: MAX_STATES,
            });
        }
        Ok(Self {
            states,
            total: total as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Calls `f(assignment, index)` over the space, row-major in variable order.
    pub fn for_each(&self, mut f: impl FnMut(&[usize], usize)) {
        let mut x = vec![0usize; self.states.len()];
        for idx in 0..self.total {
            f(&x, idx);
            for d in (0..x.len()).rev() {
                x[d] += 1;
                if x[d] < self.states[d] {
                    break;
                }
                x[d] = 0;
            }
        }
    }
}

fn table<T: Real>(g: &FactorGraph<T>, a: usize) -> Result<&[T]> {
    match &g.factor(a).kind {
        FactorKind::Table(t) => Ok(t),
        _ => Err(Error::InvalidGraph(format!(
            "factor `{}` is not a table",
            g.factor(a).name
        ))),
    }
}

fn local_index(states: &[usize], args: &[VarId], x: &[usize]) -> usize {
    args.iter().fold(0, |acc, i| acc * states[*i] + x[*i])
}

/// `ln f(x) = Σ_a ln f_a(x_a)` over the whole space.
fn log_f<T: Real>(g: &FactorGraph<T>, space: &AssignmentSpace) -> Result<Vec<T>> {
    let tables = (0..g.num_factors()).map(|a| table(g, a)).collect::<Result<Vec<_>>>()?;
    let mut out = vec![T::zero(); space.len()];
    space.for_each(|x, idx| {
        out[idx] = g
            .factors()
            .iter()
            .zip(&tables)
            .map(|(f, t)| t[local_index(space.states(), &f.args, x)].ln())
            .sum();
    });
    Ok(out)
}

/// Normalized `p(x) = f(x)/Z` and `ln Z`.
pub fn brute_force_joint<T: Real>(g: &FactorGraph<T>) -> Result<(Vec<T>, T)> {
    let space = AssignmentSpace::new(g)?;
    let lf = log_f(g, &space)?;
    let log_z = crate::log_sum_exp(&lf);
    if !log_z.is_finite() {
        return Err(Error::NonNormalizable);
    }
    Ok((lf.into_iter().map(|l| (l - log_z).exp()).collect(), log_z))
}

pub fn brute_force_log_z<T: Real>(g: &FactorGraph<T>) -> Result<T> {
    brute_force_joint(g).map(|(_, z)| z)
}

/// Exact marginals of every variable.
pub fn brute_force_marginals<T: Real>(g: &FactorGraph<T>) -> Result<Vec<Vec<T>>> {
    let space = AssignmentSpace::new(g)?;
    let (p, _) = brute_force_joint(g)?;
    let mut out: Vec<Vec<T>> = space.states().iter().map(|s| vec![T::zero(); *s]).collect();
    space.for_each(|x, idx| {
        for (i, xi) in x.iter().enumerate() {
            out[i][*xi] += p[idx];
        }
    });
    Ok(out)
}

/// Exact factor marginals, each row-major in argument order.
pub fn brute_force_factor_marginals<T: Real>(g: &FactorGraph<T>) -> Result<Vec<Vec<T>>> {
    let space = AssignmentSpace::new(g)?;
    let (p, _) = brute_force_joint(g)?;
    let mut out: Vec<Vec<T>> = g
        .factors()
        .iter()
        .map(|f| vec![T::zero(); f.args.iter().map(|i| space.states()[*i]).product()])
        .collect();
    space.for_each(|x, idx| {
        for (a, f) in g.factors().iter().enumerate() {
            out[a][local_index(space.states(), &f.args, x)] += p[idx];
        }
    });
    Ok(out)
}

fn check_normalized<T: Real>(b: &[T], what: &str) -> Result<()> {
    let s: T = b.iter().copied().sum();
    if (s - T::one()).abs() > T::lit(1e-9) || b.iter().any(|x| *x < T::zero()) {
        return Err(Error::InvalidParameter {
            name: "beliefs",
            reason: format!("{what} sums to {s}"),
        });
    }
    Ok(())
}

/// `F(b) = Σ_x b ln b − Σ_x b ln f`, with `b` a joint table.
pub fn variational_free_energy<T: Real>(b: &[T], g: &FactorGraph<T>) -> Result<T> {
    let space = AssignmentSpace::new(g)?;
    if b.len() != space.len() {
        return Err(Error::Dimension(format!(
            "joint of length {} for {} states",
            b.len(),
            space.len()
        )));
    }
    check_normalized(b, "joint belief")?;
    let lf = log_f(g, &space)?;
    let mut energy = T::zero();
    for (bx, l) in b.iter().zip(&lf) {
        if *bx > T::zero() {
            energy += xlogx(*bx) - *bx * *l;
        }
    }
    Ok(energy)
}

/// Mean-field joint `Π_i b_i(x_i)`.
pub fn product_joint<T: Real>(g: &FactorGraph<T>, marginals: &[Vec<T>]) -> Result<Vec<T>> {
    let space = AssignmentSpace::new(g)?;
    let mut out = vec![T::zero(); space.len()];
    space.for_each(|x, idx| {
        out[idx] = x.iter().enumerate().map(|(i, xi)| marginals[i][*xi]).product();
    });
    Ok(out)
}

/// Factor beliefs `b_a` (row-major in argument order) and variable beliefs `b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheBeliefSet<T> {
    pub factors: Vec<Vec<T>>,
    pub variables: Vec<Vec<T>>,
}

impl<T: Real> BetheBeliefSet<T> {
    /// Takes factor beliefs from single-block factors of an engine run.
    pub fn from_beliefs(g: &FactorGraph<T>, b: &Beliefs<T>) -> Result<Self> {
        let mut factors = Vec::with_capacity(g.num_factors());
        for (a, blocks) in b.blocks.iter().enumerate() {
            match (blocks.as_slice(), g.blocks(a)) {
                ([Belief::Table(t)], [order]) if order.windows(2).all(|w| w[0] < w[1]) => factors.push(t.clone()),
                _ => {
                    return Err(Error::InvalidParameter {
                        name: "beliefs",
                        reason: format!("factor `{}` has no joint table belief", g.factor(a).name),
                    })
                }
            }
        }
        let variables = b
            .variables
            .iter()
            .map(|v| {
                v.table().map(<[T]>::to_vec).ok_or_else(|| Error::InvalidParameter {
                    name: "beliefs",
                    reason: "variable belief is not a table".into(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { factors, variables })
    }

    fn validate(&self, g: &FactorGraph<T>) -> Result<()> {
        if self.factors.len() != g.num_factors() || self.variables.len() != g.num_variables() {
            return Err(Error::Dimension("belief set does not match the graph".into()));
        }
        for (a, (b, f)) in self.factors.iter().zip(g.factors()).enumerate() {
            if b.len() != table(g, a)?.len() {
                return Err(Error::Dimension(format!("belief of `{}` has the wrong size", f.name)));
            }
            check_normalized(b, &f.name)?;
        }
        for (i, (b, v)) in self.variables.iter().zip(g.variables()).enumerate() {
            if Some(b.len()) != v.domain.states() {
                return Err(Error::Dimension(format!("belief of variable #{i} has the wrong size")));
            }
            check_normalized(b, &v.name)?;
        }
        Ok(())
    }

    /// Largest gap between a marginal of `b_a` and the matching `b_i`.
    pub fn consistency_gap(&self, g: &FactorGraph<T>) -> T {
        let mut gap = T::zero();
        for (a, f) in g.factors().iter().enumerate() {
            let st: Vec<usize> = f
                .args
                .iter()
                .map(|i| g.variable(*i).domain.states().unwrap_or(1))
                .collect();
            for (k, &i) in f.args.iter().enumerate() {
                let mut marg = vec![T::zero(); st[k]];
                for_each(&st, |x, idx| marg[x[k]] += self.factors[a][idx]);
                for (m, b) in marg.iter().zip(&self.variables[i]) {
                    gap = gap.max((*m - *b).abs());
                }
            }
        }
        gap
    }
}

fn for_each(states: &[usize], mut f: impl FnMut(&[usize], usize)) {
    let mut x = vec![0usize; states.len()];
    let total: usize = states.iter().product();
    for idx in 0..total {
        f(&x, idx);
        for d in (0..x.len()).rev() {
            x[d] += 1;
            if x[d] < states[d] {
                break;
            }
            x[d] = 0;
        }
    }
}

/// `F_B = Σ_a Σ b_a ln(b_a/f_a) − Σ_i (A_i − 1) Σ b_i ln b_i`.
pub fn bethe_free_energy<T: Real>(beliefs: &BetheBeliefSet<T>, g: &FactorGraph<T>) -> Result<T> {
    beliefs.validate(g)?;
    let mut energy = T::zero();
    for (a, b) in beliefs.factors.iter().enumerate() {
        for (bx, fx) in b.iter().zip(table(g, a)?) {
            energy += xlogy_ratio(*bx, *fx);
        }
    }
    for (i, b) in beliefs.variables.iter().enumerate() {
        let weight = T::from_usize_lossy(g.degree(i)) - T::one();
        let neg_entropy: T = b.iter().map(|x| xlogx(*x)).sum();
        energy -= weight * neg_entropy;
    }
    Ok(energy)
}

fn normalized<T: Real>(v: Vec<T>) -> Vec<T> {
    let s: T = v.iter().copied().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn payload_table<T: Real>(p: &Payload<T>) -> Result<&[T]> {
    match p {
        Payload::Table(t) => Ok(t),
        _ => Err(Error::InvalidParameter {
            name: "messages",
            reason: "expected table messages".into(),
        }),
    }
}

/// Largest violation of `b_a ∝ f_a Π n_{i→a}` and `b_i ∝ Π m_{a→i}`.
///
/// `to_variable` and `to_factor` are indexed by graph edge.
pub fn fixed_point_residual<T: Real>(
    g: &FactorGraph<T>,
    beliefs: &BetheBeliefSet<T>,
    to_variable: &[Payload<T>],
    to_factor: &[Payload<T>],
) -> Result<T> {
    beliefs.validate(g)?;
    let mut res = T::zero();
    for (a, f) in g.factors().iter().enumerate() {
        let st: Vec<usize> = f
            .args
            .iter()
            .map(|i| g.variable(*i).domain.states().unwrap_or(1))
            .collect();
        let t = table(g, a)?;
        let n = (0..f.args.len())
            .map(|k| payload_table(&to_factor[g.edge_id(a, k)]))
            .collect::<Result<Vec<_>>>()?;
        let mut target = vec![T::zero(); t.len()];
        for_each(&st, |x, idx| {
            target[idx] = x.iter().enumerate().fold(t[idx], |w, (k, xk)| w * n[k][*xk]);
        });
        for (b, p) in beliefs.factors[a].iter().zip(normalized(target)) {
            res = res.max((*b - p).abs());
        }
    }
    for i in 0..g.num_variables() {
        let mut target = vec![T::one(); beliefs.variables[i].len()];
        for (a, k) in g.neighbors(i) {
            for (x, m) in target.iter_mut().zip(payload_table(&to_variable[g.edge_id(*a, *k)])?) {
                *x *= *m;
            }
        }
        for (b, p) in beliefs.variables[i].iter().zip(normalized(target)) {
            res = res.max((*b - p).abs());
        }
    }
    Ok(res)
}

/// Largest violation of the mean-field condition
/// `b_i ∝ exp(Σ_{a∋i} E_{Π_{j≠i} b_j} ln f_a)`.
pub fn vmp_residual<T: Real>(g: &FactorGraph<T>, marginals: &[Vec<T>]) -> Result<T> {
    let mut res = T::zero();
    for (i, b) in marginals.iter().enumerate() {
        let mut log_target = vec![T::zero(); b.len()];
        for (a, k) in g.neighbors(i) {
            let f = g.factor(*a);
            let st: Vec<usize> = f
                .args
                .iter()
                .map(|j| g.variable(*j).domain.states().unwrap_or(1))
                .collect();
            let t = table(g, *a)?;
            for_each(&st, |x, idx| {
                let w: T = x
                    .iter()
                    .enumerate()
                    .filter(|(kk, _)| kk != k)
                    .map(|(kk, xk)| marginals[f.args[kk]][*xk])
                    .product();
                if w > T::zero() {
                    log_target[x[*k]] += w * t[idx].ln();
                }
            });
        }
        let top = log_target.iter().copied().fold(T::neg_infinity(), T::max);
        let target = normalized(log_target.into_iter().map(|l| (l - top).exp()).collect());
        for (p, q) in b.iter().zip(target) {
            res = res.max((*p - q).abs());
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests;
