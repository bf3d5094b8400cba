//! Factor graphs annotated with constraint choices.
//!
//! Besides the bipartite structure, a graph records
//!
//! * a partition of every factor's arguments into disjoint blocks
//!   (`b_a = Π_v b_{a,v}`; the single-block partition is plain Bethe),
//! * per edge, whether the factor-side and variable-side beliefs must agree
//!   in full (marginalization consistency) or only in selected moments,
//! * optional point-mass markers on continuous scalar variables (EM blocks).
//!
//! Constraint kinds are stored per edge but every edge of one variable must
//! carry the same kind.

mod hyper;
pub mod random;
mod text;

pub use hyper::{HyperNode, HyperView};
pub use text::{parse_graph, write_graph};

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::expfam::{ExpFamilyDensity, GenericPrior, SufficientStatistic, Value};
use crate::{abs2, Error, Real, Result};

pub type VarId = usize;
pub type FactorId = usize;

/// Domain of a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Categories `0..k`.
    Discrete(usize),
    /// A continuous family: `RealGaussian`, `ComplexGaussian` or `Gamma`.
    Continuous(SufficientStatistic),
}

impl Domain {
    pub fn states(&self) -> Option<usize> {
        match self {
            Domain::Discrete(k) => Some(*k),
            Domain::Continuous(_) => None,
        }
    }

    /// The statistic messages into this variable live in.
    pub fn statistic(&self) -> SufficientStatistic {
        match self {
            Domain::Discrete(k) => SufficientStatistic::Categorical(*k),
            Domain::Continuous(s) => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub domain: Domain,
}

/// Closed-form structure declared by a log-density factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Conjugacy<T> {
    /// Unary `f(x) = exp(ηᵀ t(x))`.
    ExpFamily(ExpFamilyDensity<T>),
    /// Unary generic prior, evaluated at entry `index`.
    Prior { prior: GenericPrior<T>, index: usize },
    /// `f(x, α) = CN(x; 0, α)` with `x` complex and `α > 0` a variance.
    GaussianVariance,
}

type LogFn<T> = dyn Fn(&[Value<T>]) -> T + Send + Sync;

/// A factor given by `ln f_a` plus its declared conjugacy class.
#[derive(Clone)]
pub struct LogDensity<T> {
    eval: Arc<LogFn<T>>,
    class: Conjugacy<T>,
}

impl<T: Real> LogDensity<T> {
    pub fn new(class: Conjugacy<T>, eval: impl Fn(&[Value<T>]) -> T + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(eval),
            class,
        }
    }

    pub fn exp_family(d: ExpFamilyDensity<T>) -> Self {
        let inner = d.clone();
        Self::new(Conjugacy::ExpFamily(d), move |x| {
            inner.log_unnormalized(x[0]).unwrap_or(T::neg_infinity())
        })
    }

    pub fn prior(prior: GenericPrior<T>, index: usize) -> Self {
        let inner = prior.clone();
        Self::new(Conjugacy::Prior { prior, index }, move |x| match (&inner, x[0]) {
            (GenericPrior::BernoulliGaussian { rho, v0 }, Value::Complex(z)) => {
                let slab = *rho * (-abs2(z) / *v0).exp() / (T::PI() * *v0);
                if abs2(z) == T::zero() && *rho < T::one() {
                    T::infinity()
                } else {
                    slab.ln()
                }
            }
            (GenericPrior::ZeroMeanGaussianVec { alpha }, Value::Complex(z)) => {
                -abs2(z) / alpha[index] - (T::PI() * alpha[index]).ln()
            }
            _ => T::neg_infinity(),
        })
    }

    pub fn gaussian_variance() -> Self {
        Self::new(Conjugacy::GaussianVariance, |x| match (x[0], x[1]) {
            (Value::Complex(z), Value::Real(a)) if a > T::zero() => -abs2(z) / a - (T::PI() * a).ln(),
            _ => T::neg_infinity(),
        })
    }

    pub fn class(&self) -> &Conjugacy<T> {
        &self.class
    }

    /// `ln f_a(x_a)`.
    pub fn eval(&self, x: &[Value<T>]) -> T {
        (self.eval)(x)
    }
}

impl<T: fmt::Debug> fmt::Debug for LogDensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogDensity")
            .field("class", &self.class)
            .finish_non_exhaustive()
    }
}

/// What a factor computes.
#[derive(Debug, Clone)]
pub enum FactorKind<T> {
    /// Dense non-negative table over discrete arguments, row-major in argument order.
    Table(Vec<T>),
    LogDensity(LogDensity<T>),
    /// `δ(z − Σ_k a_k x_k)` with arguments `[z, x_1, …, x_K]`.
    LinearDelta(Vec<Complex<T>>),
    /// `CN(y; z, λ⁻¹)`. With `precision: None` the arguments are `[z, λ]`
    /// and λ is itself a variable.
    GaussianLikelihood {
        y: Complex<T>,
        precision: Option<T>,
    },
}

#[derive(Debug, Clone)]
pub struct Factor<T> {
    pub name: String,
    pub args: Vec<VarId>,
    pub kind: FactorKind<T>,
}

/// Constraint tying a factor-side belief to a variable belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeConstraint {
    MarginalizationConsistency,
    MomentMatching(SufficientStatistic),
}

/// A validated, immutable annotated factor graph.
#[derive(Debug, Clone)]
pub struct FactorGraph<T> {
    variables: Vec<Variable>,
    factors: Vec<Factor<T>>,
    /// Per factor: blocks of argument positions.
    partitions: Vec<Vec<Vec<usize>>>,
    /// Per factor, per argument position.
    edge_constraints: Vec<Vec<EdgeConstraint>>,
    point_mass: Vec<Option<T>>,
    /// Per variable: (factor, argument position).
    neighbors: Vec<Vec<(FactorId, usize)>>,
    edge_offsets: Vec<usize>,
}

/// Collects variables, factors and annotations; [`GraphBuilder::build`] validates.
#[derive(Debug, Clone, Default)]
pub struct GraphBuilder<T> {
    variables: Vec<Variable>,
    factors: Vec<Factor<T>>,
    partitions: Vec<(FactorId, Vec<Vec<VarId>>)>,
    constraints: Vec<(VarId, Option<FactorId>, EdgeConstraint)>,
    point_mass: Vec<(VarId, T)>,
}

impl<T: Real> GraphBuilder<T> {
    pub fn new() -> Self {
        Self {
            variables: Vec::new(),
            factors: Vec::new(),
            partitions: Vec::new(),
            constraints: Vec::new(),
            point_mass: Vec::new(),
        }
    }

    pub fn variable(&mut self, name: impl Into<String>, domain: Domain) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            domain,
        });
        self.variables.len() - 1
    }

    pub fn factor(&mut self, name: impl Into<String>, args: &[VarId], kind: FactorKind<T>) -> FactorId {
        self.factors.push(Factor {
            name: name.into(),
            args: args.to_vec(),
            kind,
        });
        self.factors.len() - 1
    }

    /// Replaces the trivial partition of `factor` by `blocks` (variable ids).
    pub fn partition(&mut self, factor: FactorId, blocks: Vec<Vec<VarId>>) -> &mut Self {
        self.partitions.push((factor, blocks));
        self
    }

    /// Splits `factor` into singleton blocks (mean-field on that factor).
    pub fn fully_factorize(&mut self, factor: FactorId) -> &mut Self {
        let blocks = self.factors[factor].args.iter().map(|v| vec![*v]).collect();
        self.partition(factor, blocks)
    }

    /// Sets the constraint on every edge of `var`.
    pub fn constraint(&mut self, var: VarId, c: EdgeConstraint) -> &mut Self {
        self.constraints.push((var, None, c));
        self
    }

    /// Sets the constraint on the single edge `factor - var`.
    pub fn edge_constraint(&mut self, factor: FactorId, var: VarId, c: EdgeConstraint) -> &mut Self {
        self.constraints.push((var, Some(factor), c));
        self
    }

    /// Forces `var`'s belief to a point mass, starting at `initial`.
    /// Only positive scalar (Gamma-domain) variables qualify.
    pub fn point_mass(&mut self, var: VarId, initial: T) -> &mut Self {
        self.point_mass.push((var, initial));
        self
    }

    pub fn build(self) -> Result<FactorGraph<T>> {
        let nv = self.variables.len();
        let nf = self.factors.len();
        let mut neighbors = vec![Vec::new(); nv];
        for (a, f) in self.factors.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for (k, &v) in f.args.iter().enumerate() {
                if v >= nv {
                    return Err(Error::InvalidGraph(format!(
                        "factor `{}` references unknown variable #{v}",
                        f.name
                    )));
                }
                if !seen.insert(v) {
                    return Err(Error::InvalidGraph(format!(
                        "factor `{}` lists variable `{}` twice",
                        f.name, self.variables[v].name
                    )));
                }
                neighbors[v].push((a, k));
            }
            validate_kind(f, &self.variables)?;
        }
        if let Some(i) = neighbors.iter().position(|n| n.is_empty()) {
            return Err(Error::InvalidGraph(format!(
                "variable `{}` is not an argument of any factor",
                self.variables[i].name
            )));
        }

        let mut partitions: Vec<Vec<Vec<usize>>> =
            self.factors.iter().map(|f| vec![(0..f.args.len()).collect()]).collect();
        for (a, blocks) in &self.partitions {
            let f = self
                .factors
                .get(*a)
                .ok_or_else(|| Error::InvalidGraph(format!("partition references unknown factor #{a}")))?;
            let mut used = BTreeSet::new();
            let mut out = Vec::with_capacity(blocks.len());
            for block in blocks {
                if block.is_empty() {
                    return Err(Error::InvalidGraph(format!("empty block in partition of `{}`", f.name)));
                }
                let mut positions = Vec::with_capacity(block.len());
                for v in block {
                    let k = f.args.iter().position(|x| x == v).ok_or_else(|| {
                        Error::InvalidGraph(format!(
                            "partition of `{}` names variable #{v}, which is not an argument",
                            f.name
                        ))
                    })?;
                    if !used.insert(k) {
                        return Err(Error::InvalidGraph(format!(
                            "blocks of `{}` overlap on variable `{}`",
                            f.name, self.variables[*v].name
                        )));
                    }
                    positions.push(k);
                }
                out.push(positions);
            }
            if used.len() != f.args.len() {
                return Err(Error::InvalidGraph(format!(
                    "blocks of `{}` do not cover all of its arguments",
                    f.name
                )));
            }
            partitions[*a] = out;
        }

        let mut edge_constraints: Vec<Vec<EdgeConstraint>> = self
            .factors
            .iter()
            .map(|f| vec![EdgeConstraint::MarginalizationConsistency; f.args.len()])
            .collect();
        for (v, factor, c) in &self.constraints {
            if *v >= nv {
                return Err(Error::InvalidGraph(format!("constraint on unknown variable #{v}")));
            }
            if let EdgeConstraint::MomentMatching(stat) = c {
                if *stat != self.variables[*v].domain.statistic() {
                    return Err(Error::InvalidGraph(format!(
                        "moment matching on `{}` uses {stat}, domain needs {}",
                        self.variables[*v].name,
                        self.variables[*v].domain.statistic()
                    )));
                }
            }
            match factor {
                None => {
                    for (a, k) in &neighbors[*v] {
                        edge_constraints[*a][*k] = *c;
                    }
                }
                Some(a) => {
                    let k = neighbors[*v]
                        .iter()
                        .find(|(fa, _)| fa == a)
                        .map(|(_, k)| *k)
                        .ok_or_else(|| {
                            Error::InvalidGraph(format!(
                                "no edge between factor #{a} and `{}`",
                                self.variables[*v].name
                            ))
                        })?;
                    edge_constraints[*a][k] = *c;
                }
            }
        }
        for (v, nbrs) in neighbors.iter().enumerate() {
            let kinds: BTreeSet<bool> = nbrs
                .iter()
                .map(|(a, k)| matches!(edge_constraints[*a][*k], EdgeConstraint::MarginalizationConsistency))
                .collect();
            if kinds.len() > 1 {
                return Err(Error::InvalidGraph(format!(
                    "variable `{}` mixes marginalization and moment constraints",
                    self.variables[v].name
                )));
            }
        }

        let mut point_mass = vec![None; nv];
        for (v, init) in &self.point_mass {
            let var = self
                .variables
                .get(*v)
                .ok_or_else(|| Error::InvalidGraph(format!("point mass on unknown variable #{v}")))?;
            if var.domain != Domain::Continuous(SufficientStatistic::Gamma) {
                return Err(Error::InvalidGraph(format!(
                    "point mass requires a positive scalar variable, `{}` is {:?}",
                    var.name, var.domain
                )));
            }
            if !(*init > T::zero()) {
                return Err(Error::InvalidGraph(format!(
                    "point mass on `{}` starts at non-positive {init}",
                    var.name
                )));
            }
            point_mass[*v] = Some(*init);
        }
        for (a, f) in self.factors.iter().enumerate() {
            for block in &partitions[a] {
                if block.len() > 1 && block.iter().any(|k| point_mass[f.args[*k]].is_some()) {
                    return Err(Error::InvalidGraph(format!(
                        "point-mass variable shares a block of `{}` with other variables",
                        f.name
                    )));
                }
            }
        }
        debug_assert_eq!(partitions.len(), nf);

        let mut edge_offsets = Vec::with_capacity(nf + 1);
        edge_offsets.push(0);
        for f in &self.factors {
            edge_offsets.push(edge_offsets.last().unwrap() + f.args.len());
        }

        Ok(FactorGraph {
            edge_offsets,
            variables: self.variables,
            factors: self.factors,
            partitions,
            edge_constraints,
            point_mass,
            neighbors,
        })
    }
}

fn validate_kind<T: Real>(f: &Factor<T>, vars: &[Variable]) -> Result<()> {
    let bad = |reason: String| Err(Error::InvalidGraph(format!("factor `{}`: {reason}", f.name)));
    let domain = |k: usize| vars[f.args[k]].domain;
    match &f.kind {
        FactorKind::Table(values) => {
            let mut size = 1usize;
            for k in 0..f.args.len() {
                match domain(k) {
                    Domain::Discrete(s) if s > 0 => size *= s,
                    d => return bad(format!("table argument has domain {d:?}")),
                }
            }
            if values.len() != size {
                return bad(format!("table has {} entries, expected {size}", values.len()));
            }
            if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
                return bad("table entries must be finite and non-negative".into());
            }
            if !values.iter().any(|v| *v > T::zero()) {
                return bad("table has no positive entry".into());
            }
        }
        FactorKind::LinearDelta(coeffs) => {
            if coeffs.len() + 1 != f.args.len() {
                return bad(format!("{} coefficients for {} arguments", coeffs.len(), f.args.len()));
            }
            if coeffs.iter().all(|c| abs2(*c) == T::zero()) {
                return bad("coefficient row is zero".into());
            }
            for k in 0..f.args.len() {
                if domain(k) != Domain::Continuous(SufficientStatistic::ComplexGaussian) {
                    return bad("linear delta needs complex Gaussian arguments".into());
                }
            }
        }
        FactorKind::GaussianLikelihood { precision, .. } => {
            if domain(0) != Domain::Continuous(SufficientStatistic::ComplexGaussian) {
                return bad("likelihood mean must be complex Gaussian".into());
            }
            match (precision, f.args.len()) {
                (Some(p), 1) if *p > T::zero() => {}
                (None, 2) if domain(1) == Domain::Continuous(SufficientStatistic::Gamma) => {}
                _ => return bad("expects [z] with a positive precision or [z, λ] with λ Gamma".into()),
            }
        }
        FactorKind::LogDensity(ld) => match ld.class() {
            Conjugacy::ExpFamily(d) => {
                if f.args.len() != 1 || domain(0).statistic() != d.statistic() {
                    return bad("exp-family factor must be unary over a matching domain".into());
                }
            }
            Conjugacy::Prior { .. } => {
                if f.args.len() != 1 || domain(0) != Domain::Continuous(SufficientStatistic::ComplexGaussian) {
                    return bad("prior factor must be unary over a complex variable".into());
                }
            }
            Conjugacy::GaussianVariance => {
                if f.args.len() != 2
                    || domain(0) != Domain::Continuous(SufficientStatistic::ComplexGaussian)
                    || domain(1) != Domain::Continuous(SufficientStatistic::Gamma)
                {
                    return bad("expects [x complex, α positive]".into());
                }
            }
        },
    }
    Ok(())
}

impl<T: Real> FactorGraph<T> {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, i: VarId) -> &Variable {
        &self.variables[i]
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    pub fn factor(&self, a: FactorId) -> &Factor<T> {
        &self.factors[a]
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn factor_id(&self, name: &str) -> Option<FactorId> {
        self.factors.iter().position(|f| f.name == name)
    }

    /// Edges are numbered factor by factor, in argument order.
    pub fn num_edges(&self) -> usize {
        *self.edge_offsets.last().unwrap_or(&0)
    }

    pub fn edge_id(&self, a: FactorId, k: usize) -> usize {
        self.edge_offsets[a] + k
    }

    /// `(factor, argument position, variable)` of edge `e`.
    pub fn edge(&self, e: usize) -> (FactorId, usize, VarId) {
        let a = self.edge_offsets.partition_point(|o| *o <= e) - 1;
        let k = e - self.edge_offsets[a];
        (a, k, self.factors[a].args[k])
    }

    /// `A_i`, the number of factors having `i` as an argument.
    pub fn degree(&self, i: VarId) -> usize {
        self.neighbors[i].len()
    }

    /// Edges at variable `i` as `(factor, argument position)`.
    pub fn neighbors(&self, i: VarId) -> &[(FactorId, usize)] {
        &self.neighbors[i]
    }

    /// Blocks of factor `a`, as argument positions.
    pub fn blocks(&self, a: FactorId) -> &[Vec<usize>] {
        &self.partitions[a]
    }

    /// Index of the block of factor `a` holding argument position `k`.
    pub fn block_of(&self, a: FactorId, k: usize) -> usize {
        self.partitions[a]
            .iter()
            .position(|b| b.contains(&k))
            .expect("validated partition covers all arguments")
    }

    pub fn is_trivially_partitioned(&self, a: FactorId) -> bool {
        self.partitions[a].len() == 1
    }

    pub fn edge_constraint(&self, a: FactorId, k: usize) -> EdgeConstraint {
        self.edge_constraints[a][k]
    }

    /// The constraint class of variable `i` (uniform over its edges).
    pub fn constraint(&self, i: VarId) -> EdgeConstraint {
        let (a, k) = self.neighbors[i][0];
        self.edge_constraints[a][k]
    }

    /// Initial location if `i` is point-mass constrained.
    pub fn point_mass(&self, i: VarId) -> Option<T> {
        self.point_mass[i]
    }

    pub fn is_discrete(&self) -> bool {
        self.variables.iter().all(|v| matches!(v.domain, Domain::Discrete(_)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.variables.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for (a, _) in &self.neighbors[i] {
                for &j in &self.factors[*a].args {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// True iff the bipartite graph is connected and acyclic.
    pub fn is_tree(&self) -> bool {
        let edges: usize = self.factors.iter().map(|f| f.args.len()).sum();
        self.is_connected() && edges + 1 == self.variables.len() + self.factors.len()
    }

    /// True iff every connected component is a tree.
    pub fn is_forest(&self) -> bool {
        let n = self.variables.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            let mut queue = VecDeque::from([s]);
            while let Some(i) = queue.pop_front() {
                for (a, _) in &self.neighbors[i] {
                    for &j in &self.factors[*a].args {
                        if comp[j] == usize::MAX {
                            comp[j] = count;
                            queue.push_back(j);
                        }
                    }
                }
            }
            count += 1;
        }
        let edges: usize = self.factors.iter().map(|f| f.args.len()).sum();
        edges + count == n + self.factors.len()
    }

    /// The modified graph with one hyper-variable node per (factor, block).
    pub fn hyper_view(&self) -> HyperView {
        HyperView::new(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> GraphBuilder<f64> {
        let mut b = GraphBuilder::new();
        let x1 = b.variable("x1", Domain::Discrete(2));
        let x2 = b.variable("x2", Domain::Discrete(2));
        b.factor("f1", &[x1], FactorKind::Table(vec![0.6, 0.4]));
        b.factor("f2", &[x1, x2], FactorKind::Table(vec![0.9, 0.1, 0.1, 0.9]));
        b
    }

    #[test]
    fn builds_a_tree() {
        let g = pair().build().unwrap();
        assert!(g.is_tree());
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(1), 1);
        assert!(g.is_trivially_partitioned(1));
        assert_eq!(g.constraint(0), EdgeConstraint::MarginalizationConsistency);
    }

    #[test]
    fn accepts_partial_partition() {
        let mut b = GraphBuilder::<f64>::new();
        let xs: Vec<_> = (0..4)
            .map(|i| b.variable(format!("x{}", i + 1), Domain::Discrete(2)))
            .collect();
        let f = b.factor("fa", &xs, FactorKind::Table(vec![1.0; 16]));
        b.partition(f, vec![vec![xs[0], xs[1], xs[2]], vec![xs[3]]]);
        let g = b.build().unwrap();
        assert_eq!(g.blocks(f), &[vec![0, 1, 2], vec![3]]);
        assert_eq!(g.block_of(f, 3), 1);
    }

    #[test]
    fn rejects_overlapping_blocks() {
        let mut b = GraphBuilder::<f64>::new();
        let xs: Vec<_> = (0..3)
            .map(|i| b.variable(format!("x{i}"), Domain::Discrete(2)))
            .collect();
        let f = b.factor("f", &xs, FactorKind::Table(vec![1.0; 8]));
        b.partition(f, vec![vec![xs[0], xs[1]], vec![xs[1], xs[2]]]);
        let err = b.build().unwrap_err();
        assert!(
            matches!(err, Error::InvalidGraph(ref m) if m.contains("overlap")),
            "{err}"
        );
    }

    #[test]
    fn rejects_dangling_and_mixed_constraints() {
        let mut b = pair();
        b.factor("bad", &[7], FactorKind::Table(vec![1.0, 1.0]));
        assert!(b.build().is_err());

        let mut b = pair();
        b.edge_constraint(
            0,
            0,
            EdgeConstraint::MomentMatching(SufficientStatistic::Categorical(2)),
        );
        let err = b.build().unwrap_err();
        assert!(err.to_string().contains("mixes"), "{err}");

        let mut b = pair();
        b.constraint(0, EdgeConstraint::MomentMatching(SufficientStatistic::Categorical(2)));
        assert!(b.build().is_ok());
    }

    #[test]
    fn rejects_bad_tables_and_orphans() {
        let mut b = GraphBuilder::<f64>::new();
        let x = b.variable("x", Domain::Discrete(2));
        b.factor("f", &[x], FactorKind::Table(vec![0.0, 0.0]));
        assert!(b.build().is_err());

        let mut b = GraphBuilder::<f64>::new();
        b.variable("x", Domain::Discrete(2));
        assert!(b.build().is_err());
    }

    #[test]
    fn point_mass_rules() {
        let mut b = GraphBuilder::<f64>::new();
        let x = b.variable("x", Domain::Continuous(SufficientStatistic::ComplexGaussian));
        let a = b.variable("alpha", Domain::Continuous(SufficientStatistic::Gamma));
        b.factor("p", &[x, a], FactorKind::LogDensity(LogDensity::gaussian_variance()));
        b.point_mass(a, 1.0);
        assert!(b.clone().build().is_err(), "point mass sharing a block");
        b.fully_factorize(0);
        let g = b.build().unwrap();
        assert_eq!(g.point_mass(a), Some(1.0));

        let mut b = GraphBuilder::<f64>::new();
        let x = b.variable("x", Domain::Discrete(2));
        b.factor("f", &[x], FactorKind::Table(vec![1.0, 1.0]));
        b.point_mass(x, 0.0);
        assert!(b.build().is_err());
    }

    #[test]
    fn loop_detection() {
        let mut b = GraphBuilder::<f64>::new();
        let xs: Vec<_> = (0..3)
            .map(|i| b.variable(format!("x{i}"), Domain::Discrete(2)))
            .collect();
        for i in 0..3 {
            b.factor(
                format!("f{i}"),
                &[xs[i], xs[(i + 1) % 3]],
                FactorKind::Table(vec![1.0; 4]),
            );
        }
        let g = b.build().unwrap();
        assert!(g.is_connected());
        assert!(!g.is_tree());
        assert!(!g.is_forest());
    }
}
