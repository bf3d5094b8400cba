//! Per-block computations on the hyper-variable graph.

use num_complex::Complex;

use super::{Belief, Payload};
use crate::expfam::{project, ExpFamilyDensity, GenericPrior, SufficientStatistic};
use crate::graph::{Conjugacy, Domain, EdgeConstraint, FactorGraph, FactorId, FactorKind};
use crate::{abs2, Error, Real, Result};

/// The factor-side term `m′_{a→(a,v)}` acting on one block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockFactor<T> {
    /// Not yet refreshed; acts as the constant 1.
    Unit,
    /// Non-negative table over the block, row-major in block order.
    Table(Vec<T>),
    /// Exponential-family potential on a single continuous variable.
    Density(ExpFamilyDensity<T>),
    /// `exp(c₀ ln x + c₁ x + c₂ / x)` on a single point-mass variable.
    Exponent([T; 3]),
    /// A generic prior on a single complex variable.
    Prior { prior: GenericPrior<T>, index: usize },
    /// The whole linear delta `δ(z − Σ a_k x_k)`.
    Linear(Vec<Complex<T>>),
}

fn intractable_marg(g: &FactorGraph<impl Real>, a: FactorId, reason: &str) -> Error {
    Error::IntractableMarginalization {
        factor: g.factor(a).name.clone(),
        reason: reason.into(),
    }
}

fn intractable_exp(g: &FactorGraph<impl Real>, a: FactorId, reason: &str) -> Error {
    Error::IntractableExpectation {
        factor: g.factor(a).name.clone(),
        reason: reason.into(),
    }
}

/// Checks that the engine can process every block of factor `a`.
pub(super) fn check_factor<T: Real>(g: &FactorGraph<T>, a: FactorId) -> Result<()> {
    let f = g.factor(a);
    if g.is_trivially_partitioned(a) {
        static_block_factor(g, a)?;
        for (k, &i) in f.args.iter().enumerate() {
            if g.point_mass(i).is_some() && f.args.len() > 1 {
                return Err(intractable_marg(g, a, "point-mass variable inside a joint block"));
            }
            let prior = matches!(&f.kind, FactorKind::LogDensity(ld) if matches!(ld.class(), Conjugacy::Prior { .. }));
            if prior && g.edge_constraint(a, k) == EdgeConstraint::MarginalizationConsistency {
                return Err(intractable_marg(
                    g,
                    a,
                    "prior times Gaussian is not Gaussian; use a moment-matching constraint",
                ));
            }
        }
        return Ok(());
    }
    match &f.kind {
        FactorKind::Table(_) => Ok(()),
        FactorKind::GaussianLikelihood { precision: None, .. } => Ok(()),
        FactorKind::LogDensity(ld) if matches!(ld.class(), Conjugacy::GaussianVariance) => {
            if g.point_mass(f.args[1]).is_some() {
                Ok(())
            } else {
                Err(intractable_exp(
                    g,
                    a,
                    "the variance block needs a point-mass constraint",
                ))
            }
        }
        FactorKind::LinearDelta(_) => Err(intractable_exp(g, a, "ln δ has no expectation")),
        _ => Err(intractable_exp(g, a, "factor kind cannot be partitioned")),
    }
}

/// Block factor of a trivially partitioned factor: `f_a` itself.
pub(super) fn static_block_factor<T: Real>(g: &FactorGraph<T>, a: FactorId) -> Result<BlockFactor<T>> {
    let f = g.factor(a);
    Ok(match &f.kind {
        FactorKind::Table(t) => BlockFactor::Table(t.clone()),
        FactorKind::LinearDelta(c) => BlockFactor::Linear(c.clone()),
        FactorKind::GaussianLikelihood { y, precision: Some(p) } => {
            BlockFactor::Density(ExpFamilyDensity::complex_gaussian_natural(*y * *p, *p))
        }
        FactorKind::GaussianLikelihood { precision: None, .. } => {
            return Err(intractable_marg(
                g,
                a,
                "joint block over mean and precision; partition it",
            ))
        }
        FactorKind::LogDensity(ld) => match ld.class() {
            Conjugacy::ExpFamily(d) => {
                if g.point_mass(f.args[0]).is_some() {
                    let e = d.natural();
                    BlockFactor::Exponent([e[0], e[1], T::zero()])
                } else {
                    BlockFactor::Density(d.clone())
                }
            }
            Conjugacy::Prior { prior, index } => BlockFactor::Prior {
                prior: prior.clone(),
                index: *index,
            },
            Conjugacy::GaussianVariance => {
                return Err(intractable_marg(
                    g,
                    a,
                    "joint block over value and variance; partition it",
                ))
            }
        },
    })
}

pub(super) fn states<T: Real>(g: &FactorGraph<T>, a: FactorId, positions: &[usize]) -> Vec<usize> {
    positions
        .iter()
        .map(|k| g.variable(g.factor(a).args[*k]).domain.states().unwrap_or(1))
        .collect()
}

/// Calls `f(config, flat_index)` for every assignment, row-major.
pub(super) fn for_each_config(states: &[usize], mut f: impl FnMut(&[usize], usize)) {
    if states.contains(&0) {
        return;
    }
    let mut x = vec![0usize; states.len()];
    let total: usize = states.iter().product();
    for idx in 0..total {
        f(&x, idx);
        for d in (0..states.len()).rev() {
            x[d] += 1;
            if x[d] < states[d] {
                break;
            }
            x[d] = 0;
        }
    }
}

fn flat_index(states: &[usize], x: impl Iterator<Item = usize>) -> usize {
    states.iter().zip(x).fold(0, |acc, (s, xi)| acc * s + xi)
}

pub(super) fn normalize<T: Real>(mut v: Vec<T>) -> Result<Vec<T>> {
    let s: T = v.iter().copied().sum();
    if !(s > T::zero()) || !s.is_finite() {
        return Err(Error::NonNormalizable);
    }
    for x in &mut v {
        *x /= s;
    }
    Ok(v)
}

fn table_of<T: Real>(p: &Payload<T>) -> &[T] {
    match p {
        Payload::Table(t) => t,
        _ => unreachable!("discrete edge carries a table"),
    }
}

fn density_of<T: Real>(p: &Payload<T>) -> &ExpFamilyDensity<T> {
    match p {
        Payload::Density(d) => d,
        _ => unreachable!("continuous edge carries a density"),
    }
}

/// Unnormalized marginal on block position `target` of `bf × Π n_p`,
/// leaving out `n_target` when `exclude_target` is set.
fn table_marginal<T: Real>(
    st: &[usize],
    bf: &BlockFactor<T>,
    n: &[&[T]],
    target: usize,
    exclude_target: bool,
) -> Vec<T> {
    let mut out = vec![T::zero(); st[target]];
    for_each_config(st, |x, idx| {
        let mut w = match bf {
            BlockFactor::Table(t) => t[idx],
            _ => T::one(),
        };
        for (p, xp) in x.iter().enumerate() {
            if !(exclude_target && p == target) {
                w *= n[p][*xp];
            }
        }
        out[x[target]] += w;
    });
    out
}

/// Belief over one block given its factor term and incoming `n` messages
/// (indexed by block position).
pub(super) fn block_belief<T: Real>(
    g: &FactorGraph<T>,
    a: FactorId,
    v: usize,
    bf: &BlockFactor<T>,
    n: &[&Payload<T>],
    point: &[Option<T>],
) -> Result<Belief<T>> {
    let block = &g.blocks(a)[v];
    let args = &g.factor(a).args;
    if let BlockFactor::Linear(_) = bf {
        let mut marg = Vec::with_capacity(block.len());
        for p in 0..block.len() {
            let m = send(g, a, v, p, bf, n)?;
            marg.push(density_of(&m).multiply(density_of(n[p]))?);
        }
        return Ok(Belief::Marginals(marg));
    }
    if let Domain::Discrete(_) = g.variable(args[block[0]]).domain {
        let st = states(g, a, block);
        let tabs: Vec<&[T]> = n.iter().map(|p| table_of(p)).collect();
        let mut joint = vec![T::zero(); st.iter().product()];
        for_each_config(&st, |x, idx| {
            let mut w = match bf {
                BlockFactor::Table(t) => t[idx],
                _ => T::one(),
            };
            for (p, xp) in x.iter().enumerate() {
                w *= tabs[p][*xp];
            }
            joint[idx] = w;
        });
        return Ok(Belief::Table(normalize(joint)?));
    }
    let i = args[block[0]];
    if let Some(x) = point[i] {
        return Ok(Belief::PointMass(x));
    }
    Ok(match bf {
        BlockFactor::Unit => Belief::Density(density_of(n[0]).clone()),
        BlockFactor::Density(d) => Belief::Density(d.multiply(density_of(n[0]))?),
        BlockFactor::Prior { prior, index } => Belief::Moments(prior.tilted(*index, Some(density_of(n[0])))?),
        BlockFactor::Exponent(_) | BlockFactor::Table(_) | BlockFactor::Linear(_) => {
            unreachable!("validated block kinds")
        }
    })
}

/// Message `m_{(a,v)→i}` to block position `p`, before damping.
pub(super) fn send<T: Real>(
    g: &FactorGraph<T>,
    a: FactorId,
    v: usize,
    p: usize,
    bf: &BlockFactor<T>,
    n: &[&Payload<T>],
) -> Result<Payload<T>> {
    let block = &g.blocks(a)[v];
    let k = block[p];
    let i = g.factor(a).args[k];
    let constraint = g.edge_constraint(a, k);
    let domain = g.variable(i).domain;
    match bf {
        BlockFactor::Linear(coeffs) => linear_send(coeffs, p, n).map(Payload::Density),
        BlockFactor::Exponent(c) => Ok(Payload::Exponent(*c)),
        _ if matches!(domain, Domain::Discrete(_)) => {
            let st = states(g, a, block);
            let tabs: Vec<&[T]> = n.iter().map(|q| table_of(q)).collect();
            match constraint {
                EdgeConstraint::MarginalizationConsistency => {
                    normalize(table_marginal(&st, bf, &tabs, p, true)).map(Payload::Table)
                }
                EdgeConstraint::MomentMatching(_) => {
                    let tilted = normalize(table_marginal(&st, bf, &tabs, p, false))?;
                    let mut out = Vec::with_capacity(tilted.len());
                    for (j, (t, c)) in tilted.iter().zip(tabs[p]).enumerate() {
                        if *c == T::zero() {
                            return Err(Error::ZeroDivision { index: j });
                        }
                        out.push(*t / *c);
                    }
                    normalize(out).map(Payload::Table)
                }
            }
        }
        BlockFactor::Unit => Ok(Payload::Density(ExpFamilyDensity::flat(domain.statistic()))),
        BlockFactor::Density(d) => Ok(Payload::Density(d.clone())),
        BlockFactor::Prior { prior, index } => {
            let cavity = density_of(n[p]);
            let tilted = prior.tilted(*index, Some(cavity))?;
            ep_project_send(SufficientStatistic::ComplexGaussian, &tilted, cavity).map(Payload::Density)
        }
        BlockFactor::Table(_) => unreachable!("tables only touch discrete variables"),
    }
}

/// `Proj(tilted) ÷ cavity`: the EP message leaving a moment-matched edge.
pub fn ep_project_send<T: Real, S: crate::expfam::MomentOracle<T> + ?Sized>(
    stat: SufficientStatistic,
    tilted: &S,
    cavity: &ExpFamilyDensity<T>,
) -> Result<ExpFamilyDensity<T>> {
    project(stat, tilted)?.divide(cavity)
}

/// Gaussian BP through `δ(z − Σ a_k x_k)`; position 0 is `z`.
fn linear_send<T: Real>(coeffs: &[Complex<T>], p: usize, n: &[&Payload<T>]) -> Result<ExpFamilyDensity<T>> {
    let stat = SufficientStatistic::ComplexGaussian;
    // z − Σ a_k x_k = 0, written as Σ_j c_j u_j = 0 with c_0 = −1.
    let c = |j: usize| {
        if j == 0 {
            Complex::new(-T::one(), T::zero())
        } else {
            coeffs[j - 1]
        }
    };
    let cp = c(p);
    if abs2(cp) == T::zero() {
        return Ok(ExpFamilyDensity::flat(stat));
    }
    // c_p u_p = −Σ_{j≠p} c_j u_j
    let mut mean = Complex::new(T::zero(), T::zero());
    let mut var = T::zero();
    for (j, msg) in n.iter().enumerate() {
        if j == p || abs2(c(j)) == T::zero() {
            continue;
        }
        let d = density_of(msg);
        let prec = d.gaussian_precision().expect("complex gaussian");
        if prec == T::zero() && d.natural().iter().all(|x| *x == T::zero()) {
            return Ok(ExpFamilyDensity::flat(stat));
        }
        if !(prec > T::zero()) {
            return Err(Error::DegenerateCavity(prec.as_f64()));
        }
        let (m, v) = d.complex_mean_var()?;
        mean -= c(j) * m;
        var += abs2(c(j)) * v;
    }
    // u_p ~ CN(mean / c_p, var / |c_p|²)
    let prec = abs2(cp) / var;
    if !prec.is_finite() {
        return Err(Error::DegenerateProjection {
            moment: "variance",
            value: var.as_f64(),
        });
    }
    Ok(ExpFamilyDensity::complex_gaussian_natural(mean / cp * prec, prec))
}

fn belief_mean_real<T: Real>(g: &FactorGraph<T>, a: FactorId, q: &Belief<T>) -> Result<T> {
    match q {
        Belief::PointMass(x) => Ok(*x),
        Belief::Density(d) if d.statistic() == SufficientStatistic::Gamma => Ok(d.to_moments()?.0[1]),
        _ => Err(intractable_exp(g, a, "expected a Gamma or point-mass belief")),
    }
}

fn belief_mean_inverse<T: Real>(g: &FactorGraph<T>, a: FactorId, q: &Belief<T>) -> Result<T> {
    match q {
        Belief::PointMass(x) => Ok(x.recip()),
        Belief::Density(d) if d.statistic() == SufficientStatistic::Gamma => {
            let shape = d.natural()[0] + T::one();
            let rate = -d.natural()[1];
            if shape > T::one() && rate > T::zero() {
                Ok(rate / (shape - T::one()))
            } else {
                Err(intractable_exp(g, a, "E[1/α] is infinite for shape ≤ 1"))
            }
        }
        _ => Err(intractable_exp(g, a, "expected a Gamma or point-mass belief")),
    }
}

/// `(E[x], E|x|²)` of a complex block belief.
fn belief_complex_moments<T: Real>(g: &FactorGraph<T>, a: FactorId, q: &Belief<T>) -> Result<(Complex<T>, T)> {
    match q {
        Belief::Density(d) => {
            let (m, v) = d.complex_mean_var()?;
            Ok((m, abs2(m) + v))
        }
        Belief::Moments(pm) => Ok((pm.mean, pm.second)),
        _ => Err(intractable_exp(g, a, "expected a complex Gaussian belief")),
    }
}

/// VMP refresh `exp(E_{Π_{v′≠v} q_{a,v′}} ln f_a)` for block `v`.
///
/// `q` holds the current belief of every block of `a`; `q[v]` is ignored.
pub fn vmp_block_update<T: Real>(g: &FactorGraph<T>, a: FactorId, v: usize, q: &[Belief<T>]) -> Result<BlockFactor<T>> {
    let f = g.factor(a);
    let blocks = g.blocks(a);
    match &f.kind {
        FactorKind::Table(table) => {
            let all: Vec<usize> = (0..f.args.len()).collect();
            let st = states(g, a, &all);
            let bst: Vec<Vec<usize>> = blocks.iter().map(|b| states(g, a, b)).collect();
            let qt: Vec<&[T]> = q
                .iter()
                .enumerate()
                .map(|(u, b)| match b {
                    Belief::Table(t) => Ok(t.as_slice()),
                    _ if u == v => Ok(&[][..]),
                    _ => Err(intractable_exp(g, a, "discrete block without a table belief")),
                })
                .collect::<Result<_>>()?;
            let mut acc = vec![T::zero(); bst[v].iter().product()];
            for_each_config(&st, |x, idx| {
                let mut w = T::one();
                for (u, blk) in blocks.iter().enumerate() {
                    if u != v {
                        w *= qt[u][flat_index(&bst[u], blk.iter().map(|k| x[*k]))];
                    }
                }
                if w > T::zero() {
                    let target = flat_index(&bst[v], blocks[v].iter().map(|k| x[*k]));
                    acc[target] += w * table[idx].ln();
                }
            });
            let top = acc.iter().copied().fold(T::neg_infinity(), T::max);
            if !top.is_finite() {
                return Err(intractable_exp(g, a, "block has no support under the other beliefs"));
            }
            Ok(BlockFactor::Table(acc.into_iter().map(|l| (l - top).exp()).collect()))
        }
        FactorKind::GaussianLikelihood { y, precision: None } => {
            let z_block = blocks.iter().position(|b| b.contains(&0)).expect("partition covers z");
            if v == z_block {
                let lam = belief_mean_real(g, a, &q[1 - v])?;
                Ok(BlockFactor::Density(ExpFamilyDensity::complex_gaussian_natural(
                    *y * lam,
                    lam,
                )))
            } else {
                let (m, s) = belief_complex_moments(g, a, &q[z_block])?;
                // E|y − z|² = |y|² − 2 Re(y* E z) + E|z|²
                let e = abs2(*y) - T::lit(2.0) * (y.conj() * m).re + s;
                if g.point_mass(f.args[1]).is_some() {
                    Ok(BlockFactor::Exponent([T::one(), -e, T::zero()]))
                } else {
                    Ok(BlockFactor::Density(ExpFamilyDensity::from_natural(
                        SufficientStatistic::Gamma,
                        vec![T::one(), -e],
                    )?))
                }
            }
        }
        FactorKind::LogDensity(ld) if matches!(ld.class(), Conjugacy::GaussianVariance) => {
            let x_block = blocks.iter().position(|b| b.contains(&0)).expect("partition covers x");
            if v == x_block {
                let inv = belief_mean_inverse(g, a, &q[1 - v])?;
                Ok(BlockFactor::Density(ExpFamilyDensity::complex_gaussian_natural(
                    Complex::new(T::zero(), T::zero()),
                    inv,
                )))
            } else {
                let (_, s) = belief_complex_moments(g, a, &q[x_block])?;
                Ok(BlockFactor::Exponent([-T::one(), T::zero(), -s]))
            }
        }
        _ => Err(intractable_exp(g, a, "factor kind has no VMP refresh")),
    }
}

/// Maximizer over `x > 0` of `c₀ ln x + c₁ x + c₂ / x`.
pub(super) fn argmax_exponent<T: Real>(c: [T; 3]) -> Result<T> {
    let [a, b, cc] = c;
    let objective = |x: T| a * x.ln() + b * x + cc / x;
    let curvature = |x: T| -a / (x * x) + T::lit(2.0) * cc / (x * x * x);
    // Stationary points solve b x² + a x − c₂ = 0.
    let mut roots = Vec::with_capacity(2);
    if b == T::zero() {
        if a != T::zero() {
            roots.push(cc / a);
        }
    } else {
        let disc = a * a + T::lit(4.0) * b * cc;
        if disc >= T::zero() {
            let q = -(a + a.signum() * disc.sqrt()) / T::lit(2.0);
            if q != T::zero() {
                roots.push(q / b);
                roots.push(-cc / q);
            } else {
                roots.push((cc / b).sqrt());
            }
        }
    }
    roots
        .into_iter()
        .filter(|x| *x > T::zero() && x.is_finite() && curvature(*x) < T::zero())
        .map(|x| (x, objective(x)))
        .fold(None, |best: Option<(T, T)>, cand| match best {
            Some(bb) if bb.1 >= cand.1 => Some(bb),
            _ => Some(cand),
        })
        .map(|(x, _)| x)
        .ok_or(Error::NonNormalizable)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_argmax_closed_forms() {
        // EM update of a variance: −ln α − s/α  →  α = s
        assert!((argmax_exponent([-1.0f64, 0.0, -2.5]).unwrap() - 2.5).abs() < 1e-14);
        // EM update of a precision: ln λ − e λ  →  λ = 1/e
        assert!((argmax_exponent([1.0f64, -0.1, 0.0]).unwrap() - 10.0).abs() < 1e-12);
        // Gamma(3, 2) mode plus the variance term
        let x = argmax_exponent([2.0f64 - 1.0, -2.0, -0.5]).unwrap();
        assert!((2.0 * x * x - x - 0.5).abs() < 1e-12);
        assert!(argmax_exponent([1.0f64, 1.0, 0.0]).is_err());
    }

    #[test]
    fn config_iteration_is_row_major() {
        let mut seen = Vec::new();
        for_each_config(&[2, 3], |x, idx| seen.push((x.to_vec(), idx)));
        assert_eq!(seen[4], (vec![1, 1], 4));
        assert_eq!(flat_index(&[2, 3], [1usize, 2].into_iter()), 5);
    }
}
