//! Message passing on the hyper-variable graph.
//!
//! Every factor `a` owns one hyper-variable node per block `(a, v)` of its
//! partition. The engine keeps, per graph edge `a - i`,
//!
//! * `m[e]`: the message from the block holding `i` to `i`,
//! * `n[e]`: the message from `i` back to that block,
//!
//! and per block the factor term `m′_{a→(a,v)}`. For a single-block factor
//! the term is `f_a` itself; for a partitioned factor it is the VMP refresh
//! `exp(E ln f_a)` under the other blocks' beliefs. Sends from a block use
//! marginalization (BP) or projection (EP) depending on the edge constraint.
//! With trivial partitions and marginalization everywhere this is plain BP;
//! with singleton blocks everywhere it is VMP.
//!
//! Point-mass variables keep a location instead of a belief. Their incoming
//! messages are exponents in `[ln x, x, 1/x]` and the location is the
//! maximizer of their sum, which turns the corresponding VMP block into an
//! EM step.

mod block;
pub mod bp;

pub use block::{ep_project_send, vmp_block_update, BlockFactor};

use std::fmt::Write as _;

use crate::expfam::{ExpFamilyDensity, PosteriorMoments, SufficientStatistic};
use crate::graph::{Domain, FactorGraph, FactorId, VarId};
use crate::{Error, Real, Result};

/// Content of a message.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload<T> {
    /// Normalized table over a discrete variable.
    Table(Vec<T>),
    /// Possibly non-normalizable exponential-family member.
    Density(ExpFamilyDensity<T>),
    /// `exp(c₀ ln x + c₁ x + c₂ / x)` into a point-mass variable.
    Exponent([T; 3]),
}

impl<T: Real> Payload<T> {
    /// The identity message for variable `i`.
    pub fn flat<U: Real>(g: &FactorGraph<U>, i: VarId) -> Self {
        if g.point_mass(i).is_some() {
            return Payload::Exponent([T::zero(); 3]);
        }
        match g.variable(i).domain {
            Domain::Discrete(k) => Payload::Table(vec![T::from_usize_lossy(k).recip(); k]),
            Domain::Continuous(s) => Payload::Density(ExpFamilyDensity::flat(s)),
        }
    }

    /// Raw parameters: table entries, natural parameters or exponent.
    pub fn params(&self) -> &[T] {
        match self {
            Payload::Table(t) => t,
            Payload::Density(d) => d.natural(),
            Payload::Exponent(c) => c,
        }
    }

    /// Product of two messages into the same variable.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        Ok(match (self, other) {
            (Payload::Table(a), Payload::Table(b)) => {
                Payload::Table(block::normalize(a.iter().zip(b).map(|(x, y)| *x * *y).collect())?)
            }
            (Payload::Density(a), Payload::Density(b)) => Payload::Density(a.multiply(b)?),
            (Payload::Exponent(a), Payload::Exponent(b)) => Payload::Exponent([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
            _ => {
                return Err(Error::FamilyMismatch {
                    left: format!("{self:?}"),
                    right: format!("{other:?}"),
                })
            }
        })
    }

    /// L∞ distance between parameters.
    pub fn distance(&self, other: &Self) -> T {
        let (a, b) = (self.params(), other.params());
        if a.len() != b.len() {
            return T::infinity();
        }
        a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
            let d = (*x - *y).abs();
            if d.is_nan() {
                T::infinity()
            } else {
                acc.max(d)
            }
        })
    }

    /// `(1 − κ)·self + κ·proposed` on parameters; `κ = 1` returns `proposed`.
    pub fn damp_towards(&self, proposed: &Self, kappa: T) -> Result<Self> {
        if kappa == T::one() {
            return Ok(proposed.clone());
        }
        let keep = T::one() - kappa;
        Ok(match (self, proposed) {
            (Payload::Table(a), Payload::Table(b)) => {
                Payload::Table(a.iter().zip(b).map(|(o, p)| keep * *o + kappa * *p).collect())
            }
            (Payload::Density(a), Payload::Density(b)) => Payload::Density(a.damp_towards(b, kappa)?),
            (Payload::Exponent(a), Payload::Exponent(b)) => Payload::Exponent([
                keep * a[0] + kappa * b[0],
                keep * a[1] + kappa * b[1],
                keep * a[2] + kappa * b[2],
            ]),
            _ => {
                return Err(Error::FamilyMismatch {
                    left: format!("{self:?}"),
                    right: format!("{proposed:?}"),
                })
            }
        })
    }
}

/// A belief on a variable or on a hyper-variable block.
#[derive(Debug, Clone, PartialEq)]
pub enum Belief<T> {
    /// Normalized table (joint over the block, row-major in block order).
    Table(Vec<T>),
    Density(ExpFamilyDensity<T>),
    PointMass(T),
    /// Exact moments of a tilted density outside the family.
    Moments(PosteriorMoments<T>),
    /// Per-variable marginals of a joint continuous block.
    Marginals(Vec<ExpFamilyDensity<T>>),
}

impl<T: Real> Belief<T> {
    pub fn table(&self) -> Option<&[T]> {
        match self {
            Belief::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn density(&self) -> Option<&ExpFamilyDensity<T>> {
        match self {
            Belief::Density(d) => Some(d),
            _ => None,
        }
    }
}

/// Update order within a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Order {
    /// Jacobi: refresh all blocks, send all `m` from the previous round's
    /// state, then recompute all `n`.
    Parallel,
    /// Gauss-Seidel over variables: refresh and receive on every edge of one
    /// variable, then send from it, before moving to the next.
    Sequential,
    /// An explicit list of actions, executed in order every round.
    Custom(Vec<Action>),
}

/// One elementary update on the hyper-variable graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// VMP refresh of block `block` of `factor`.
    Refresh { factor: FactorId, block: usize },
    /// Block → variable send on an edge.
    ToVariable(usize),
    /// Variable → block send on an edge.
    ToBlock(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    pub order: Order,
    /// Defaults to ten times the number of variables.
    pub max_rounds: Option<usize>,
    /// κ ∈ (0, 1], applied to block → variable messages.
    pub damping: T,
    /// On the L∞ change of block → variable message parameters.
    pub tolerance: T,
    pub trace: bool,
}

impl<T: Real> Default for Schedule<T> {
    fn default() -> Self {
        Self {
            order: Order::Parallel,
            max_rounds: None,
            damping: T::one(),
            tolerance: T::lit(1e-8),
            trace: false,
        }
    }
}

impl<T: Real> Schedule<T> {
    pub fn sequential() -> Self {
        Self {
            order: Order::Sequential,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: format!("{} is outside (0, 1]", self.damping),
            });
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                reason: format!("{} is not positive", self.tolerance),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToVariable,
    ToBlock,
}

/// One recorded message update.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub round: usize,
    pub edge: usize,
    pub direction: Direction,
    pub params: Vec<T>,
}

/// Renders records as `round,edge,direction,params...` lines.
pub fn format_trace<T: Real>(trace: &[TraceRecord<T>]) -> String {
    let mut out = String::new();
    for r in trace {
        let dir = match r.direction {
            Direction::ToVariable => "f2v",
            Direction::ToBlock => "v2f",
        };
        write!(out, "{},{},{dir}", r.round, r.edge).unwrap();
        for p in &r.params {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs<T> {
    pub variables: Vec<Belief<T>>,
    /// Per factor, per block.
    pub blocks: Vec<Vec<Belief<T>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T> {
    pub beliefs: Beliefs<T>,
    pub rounds: usize,
    pub converged: bool,
    /// Updates skipped because a projection or cavity was degenerate.
    pub skips: usize,
    pub trace: Vec<TraceRecord<T>>,
}

/// Mutable message store for one run on a borrowed graph.
#[derive(Debug, Clone)]
pub struct Engine<'g, T: Real> {
    g: &'g FactorGraph<T>,
    schedule: Schedule<T>,
    bf: Vec<Vec<BlockFactor<T>>>,
    m: Vec<Payload<T>>,
    n: Vec<Payload<T>>,
    point: Vec<Option<T>>,
    skips: usize,
    round: usize,
    trace: Vec<TraceRecord<T>>,
}

fn is_skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateProjection { .. }
            | Error::DegenerateCavity(_)
            | Error::NonNormalizable
            | Error::ZeroDivision { .. }
    )
}

impl<'g, T: Real> Engine<'g, T> {
    pub fn new(g: &'g FactorGraph<T>, schedule: Schedule<T>) -> Result<Self> {
        schedule.validate()?;
        if let Order::Custom(actions) = &schedule.order {
            for act in actions {
                let ok = match *act {
                    Action::Refresh { factor, block } => factor < g.num_factors() && block < g.blocks(factor).len(),
                    Action::ToVariable(e) | Action::ToBlock(e) => e < g.num_edges(),
                };
                if !ok {
                    return Err(Error::InvalidParameter {
                        name: "schedule",
                        reason: format!("{act:?} is out of range"),
                    });
                }
            }
        }
        let mut bf = Vec::with_capacity(g.num_factors());
        for a in 0..g.num_factors() {
            block::check_factor(g, a)?;
            if g.is_trivially_partitioned(a) {
                bf.push(vec![block::static_block_factor(g, a)?]);
            } else {
                bf.push(vec![BlockFactor::Unit; g.blocks(a).len()]);
            }
        }
        let flat: Vec<Payload<T>> = (0..g.num_edges()).map(|e| Payload::flat(g, g.edge(e).2)).collect();
        let point = (0..g.num_variables()).map(|i| g.point_mass(i)).collect();
        let mut engine = Self {
            g,
            schedule,
            bf,
            m: flat.clone(),
            n: flat,
            point,
            skips: 0,
            round: 0,
            trace: Vec::new(),
        };
        engine.warm_up()?;
        Ok(engine)
    }

    /// Initial VMP refreshes, block by block, so that later blocks see the
    /// terms of earlier ones. Blocks whose inputs are still flat are left
    /// for the first round.
    fn warm_up(&mut self) -> Result<()> {
        for _ in 0..2 {
            for a in 0..self.g.num_factors() {
                if self.g.is_trivially_partitioned(a) {
                    continue;
                }
                for v in 0..self.g.blocks(a).len() {
                    match self.refreshed(a, v) {
                        Ok(t) => self.bf[a][v] = t,
                        Err(e) if is_skippable(&e) || matches!(e, Error::IntractableExpectation { .. }) => {}
                        Err(e) => return Err(self.wrap_block(a, v, e)),
                    }
                }
            }
        }
        // publish the refreshed terms so that block beliefs and variable
        // beliefs agree before the first round
        for e in 0..self.g.num_edges() {
            if !self.g.is_trivially_partitioned(self.g.edge(e).0) {
                if let Ok(p) = self.proposed(e) {
                    self.m[e] = p;
                }
            }
        }
        for i in 0..self.g.num_variables() {
            self.emit(i)?;
        }
        self.trace.clear();
        Ok(())
    }

    pub fn graph(&self) -> &'g FactorGraph<T> {
        self.g
    }

    pub fn schedule(&self) -> &Schedule<T> {
        &self.schedule
    }

    pub fn skips(&self) -> usize {
        self.skips
    }

    pub fn rounds(&self) -> usize {
        self.round
    }

    /// Block → variable messages, by edge.
    pub fn to_variable(&self) -> &[Payload<T>] {
        &self.m
    }

    /// Variable → block messages, by edge.
    pub fn to_block(&self) -> &[Payload<T>] {
        &self.n
    }

    pub fn block_factor(&self, a: FactorId, v: usize) -> &BlockFactor<T> {
        &self.bf[a][v]
    }

    pub fn trace(&self) -> &[TraceRecord<T>] {
        &self.trace
    }

    fn wrap_edge(&self, e: usize, err: Error) -> Error {
        let (a, _, i) = self.g.edge(e);
        Error::Edge {
            factor: self.g.factor(a).name.clone(),
            variable: self.g.variable(i).name.clone(),
            source: Box::new(err),
        }
    }

    fn wrap_block(&self, a: FactorId, v: usize, err: Error) -> Error {
        let f = self.g.factor(a);
        let vars: Vec<&str> = self.g.blocks(a)[v]
            .iter()
            .map(|k| self.g.variable(f.args[*k]).name.as_str())
            .collect();
        Error::Edge {
            factor: f.name.clone(),
            variable: vars.join(","),
            source: Box::new(err),
        }
    }

    fn block_inputs(&self, a: FactorId, v: usize) -> Vec<&Payload<T>> {
        self.g.blocks(a)[v]
            .iter()
            .map(|k| &self.n[self.g.edge_id(a, *k)])
            .collect()
    }

    /// Current belief of block `v` of factor `a`.
    pub fn block_belief(&self, a: FactorId, v: usize) -> Result<Belief<T>> {
        block::block_belief(self.g, a, v, &self.bf[a][v], &self.block_inputs(a, v), &self.point)
    }

    fn refreshed(&self, a: FactorId, v: usize) -> Result<BlockFactor<T>> {
        let q = (0..self.g.blocks(a).len())
            .map(|u| {
                if u == v {
                    Ok(Belief::PointMass(T::zero()))
                } else {
                    self.block_belief(a, u)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        vmp_block_update(self.g, a, v, &q)
    }

    fn proposed(&self, e: usize) -> Result<Payload<T>> {
        let (a, k, _) = self.g.edge(e);
        let v = self.g.block_of(a, k);
        let p = self.g.blocks(a)[v].iter().position(|x| *x == k).expect("block holds k");
        block::send(self.g, a, v, p, &self.bf[a][v], &self.block_inputs(a, v))
    }

    /// New value of `m[e]` after damping, or `None` when skipped.
    fn receive(&mut self, e: usize) -> Result<Option<Payload<T>>> {
        match self.proposed(e) {
            Ok(p) => {
                let damped = self.m[e]
                    .damp_towards(&p, self.schedule.damping)
                    .map_err(|err| self.wrap_edge(e, err))?;
                Ok(Some(damped))
            }
            Err(err) if is_skippable(&err) => {
                self.skips += 1;
                Ok(None)
            }
            Err(err) => Err(self.wrap_edge(e, err)),
        }
    }

    fn refresh(&mut self, a: FactorId, v: usize) -> Result<()> {
        if self.g.is_trivially_partitioned(a) {
            return Ok(());
        }
        match self.refreshed(a, v) {
            Ok(t) => self.bf[a][v] = t,
            Err(err) if is_skippable(&err) => self.skips += 1,
            Err(err) => return Err(self.wrap_block(a, v, err)),
        }
        Ok(())
    }

    fn product_except(&self, i: VarId, skip: Option<usize>) -> Result<Payload<T>> {
        let mut acc = Payload::flat(self.g, i);
        for (a, k) in self.g.neighbors(i) {
            let e = self.g.edge_id(*a, *k);
            if Some(e) != skip {
                acc = acc.multiply(&self.m[e])?;
            }
        }
        Ok(acc)
    }

    /// Recomputes `n` on every edge of `i` (and its location if point-mass).
    fn emit(&mut self, i: VarId) -> Result<()> {
        let edges: Vec<usize> = self
            .g
            .neighbors(i)
            .iter()
            .map(|(a, k)| self.g.edge_id(*a, *k))
            .collect();
        if self.point[i].is_some() {
            if let Payload::Exponent(c) = self.product_except(i, None)? {
                match block::argmax_exponent(c) {
                    Ok(x) => self.point[i] = Some(x),
                    Err(_) => self.skips += 1,
                }
            }
        }
        for e in edges {
            self.emit_edge(e)?;
        }
        Ok(())
    }

    fn emit_edge(&mut self, e: usize) -> Result<()> {
        let i = self.g.edge(e).2;
        let n = self.product_except(i, Some(e)).map_err(|err| self.wrap_edge(e, err))?;
        self.record(e, Direction::ToBlock, &n);
        self.n[e] = n;
        Ok(())
    }

    fn record(&mut self, e: usize, direction: Direction, p: &Payload<T>) {
        if self.schedule.trace {
            self.trace.push(TraceRecord {
                round: self.round,
                edge: e,
                direction,
                params: p.params().to_vec(),
            });
        }
    }

    fn set_m(&mut self, e: usize, p: Payload<T>) -> T {
        let d = self.m[e].distance(&p);
        self.record(e, Direction::ToVariable, &p);
        self.m[e] = p;
        d
    }

    /// Executes one round; returns the largest block → variable change.
    pub fn step(&mut self) -> Result<T> {
        self.round += 1;
        let mut delta = T::zero();
        match self.schedule.order.clone() {
            Order::Parallel => {
                let mut fresh = self.bf.clone();
                for (a, row) in fresh.iter_mut().enumerate() {
                    if self.g.is_trivially_partitioned(a) {
                        continue;
                    }
                    for (v, slot) in row.iter_mut().enumerate() {
                        match self.refreshed(a, v) {
                            Ok(t) => *slot = t,
                            Err(err) if is_skippable(&err) => self.skips += 1,
                            Err(err) => return Err(self.wrap_block(a, v, err)),
                        }
                    }
                }
                self.bf = fresh;
                let mut next = Vec::with_capacity(self.m.len());
                for e in 0..self.m.len() {
                    next.push(self.receive(e)?);
                }
                for (e, p) in next.into_iter().enumerate() {
                    if let Some(p) = p {
                        delta = delta.max(self.set_m(e, p));
                    }
                }
                for i in 0..self.g.num_variables() {
                    self.emit(i)?;
                }
            }
            Order::Sequential => {
                for i in 0..self.g.num_variables() {
                    delta = delta.max(self.update_variable(i)?);
                }
            }
            Order::Custom(actions) => {
                for act in actions {
                    match act {
                        Action::Refresh { factor, block } => self.refresh(factor, block)?,
                        Action::ToVariable(e) => {
                            if let Some(p) = self.receive(e)? {
                                delta = delta.max(self.set_m(e, p));
                            }
                        }
                        Action::ToBlock(e) => {
                            let i = self.g.edge(e).2;
                            if self.point[i].is_some() {
                                if let Payload::Exponent(c) = self.product_except(i, None)? {
                                    if let Ok(x) = block::argmax_exponent(c) {
                                        self.point[i] = Some(x);
                                    }
                                }
                            }
                            self.emit_edge(e)?;
                        }
                    }
                }
            }
        }
        Ok(delta)
    }

    /// Coordinate update of variable `i`: refresh and receive on all its
    /// edges, then send from it. Under full factorization this is one step
    /// of coordinate-ascent VMP.
    pub fn update_variable(&mut self, i: VarId) -> Result<T> {
        let mut delta = T::zero();
        let edges: Vec<(FactorId, usize)> = self.g.neighbors(i).to_vec();
        for (a, k) in edges {
            self.refresh(a, self.g.block_of(a, k))?;
            let e = self.g.edge_id(a, k);
            if let Some(p) = self.receive(e)? {
                delta = delta.max(self.set_m(e, p));
            }
        }
        self.emit(i)?;
        Ok(delta)
    }

    /// Runs rounds until the change drops below tolerance or the limit.
    pub fn run(&mut self) -> Result<RunOutcome<T>> {
        let limit = self.schedule.max_rounds.unwrap_or(10 * self.g.num_variables().max(1));
        let mut converged = false;
        let start = self.round;
        while self.round - start < limit {
            if self.step()? < self.schedule.tolerance {
                converged = true;
                break;
            }
        }
        Ok(RunOutcome {
            beliefs: self.beliefs()?,
            rounds: self.round - start,
            converged,
            skips: self.skips,
            trace: std::mem::take(&mut self.trace),
        })
    }

    /// `b_i ∝ Π_a m_{a→i}`, or the location of a point-mass variable.
    pub fn variable_belief(&self, i: VarId) -> Result<Belief<T>> {
        if let Some(x) = self.point[i] {
            return Ok(Belief::PointMass(x));
        }
        Ok(match self.product_except(i, None)? {
            Payload::Table(t) => Belief::Table(t),
            Payload::Density(d) => Belief::Density(d),
            Payload::Exponent(_) => unreachable!("only point-mass variables receive exponents"),
        })
    }

    pub fn beliefs(&self) -> Result<Beliefs<T>> {
        let variables = (0..self.g.num_variables())
            .map(|i| self.variable_belief(i))
            .collect::<Result<_>>()?;
        let blocks = (0..self.g.num_factors())
            .map(|a| {
                (0..self.g.blocks(a).len())
                    .map(|v| self.block_belief(a, v).map_err(|e| self.wrap_block(a, v, e)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Beliefs { variables, blocks })
    }
}

/// Builds an engine and runs it to convergence or the round limit.
pub fn run<T: Real>(g: &FactorGraph<T>, schedule: Schedule<T>) -> Result<RunOutcome<T>> {
    Engine::new(g, schedule)?.run()
}

/// Complex mean and variance of a continuous variable belief.
pub fn complex_summary<T: Real>(b: &Belief<T>) -> Option<(num_complex::Complex<T>, T)> {
    match b {
        Belief::Density(d) if d.statistic() == SufficientStatistic::ComplexGaussian => d.complex_mean_var().ok(),
        Belief::Moments(m) => Some((m.mean, m.var)),
        _ => None,
    }
}

#[cfg(test)]
mod tests;
