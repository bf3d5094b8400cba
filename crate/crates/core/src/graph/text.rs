//! Line-oriented fixture format.
//!
//! ```text
//! # comment
//! var x1 discrete 2
//! var z gaussian                      # complex Gaussian
//! var lam gamma                       # positive scalar
//! factor f1 table x1 0.6 0.4
//! factor f2 table x1 x2 0.9 0.1 0.1 0.9
//! factor p gaussian z <re> <im> <var>
//! factor s bg-prior z <rho> <v0>
//! factor l likelihood z <y_re> <y_im> <precision>
//! factor d linear z x1 x2 <re> <im> <re> <im>
//! partition f2 x1 | x2
//! constraint x1 marg|moments
//! pointmass lam <initial>
//! ```
//!
//! Variable names must not parse as numbers; factor arguments end at the
//! first numeric token.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex;

use super::{Conjugacy, Domain, EdgeConstraint, FactorGraph, FactorKind, GraphBuilder, LogDensity, VarId};
use crate::expfam::{ExpFamilyDensity, GenericPrior, SufficientStatistic};
use crate::{Error, Real, Result};

fn perr(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn number<T: Real>(line: usize, tok: &str) -> Result<T> {
    tok.parse::<f64>()
        .map(T::lit)
        .map_err(|_| perr(line, format!("expected a number, found `{tok}`")))
}

/// Parses a fixture into a validated graph.
pub fn parse_graph<T: Real>(src: &str) -> Result<FactorGraph<T>> {
    let mut b = GraphBuilder::new();
    let mut vars: HashMap<String, VarId> = HashMap::new();
    let mut factors: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let lookup = |name: &str| {
            vars.get(name)
                .copied()
                .ok_or_else(|| perr(line, format!("unknown variable `{name}`")))
        };
        match toks[0] {
            "var" => {
                let (name, kind) = match toks.as_slice() {
                    [_, name, kind, ..] => (*name, *kind),
                    _ => return Err(perr(line, "expected `var <id> <domain>`")),
                };
                if name.parse::<f64>().is_ok() {
                    return Err(perr(line, format!("variable name `{name}` looks like a number")));
                }
                let domain = match (kind, toks.len()) {
                    ("discrete", 4) => {
                        let k = toks[3]
                            .parse::<usize>()
                            .map_err(|_| perr(line, format!("bad state count `{}`", toks[3])))?;
                        Domain::Discrete(k)
                    }
                    ("gaussian", 3) => Domain::Continuous(SufficientStatistic::ComplexGaussian),
                    ("real", 3) => Domain::Continuous(SufficientStatistic::RealGaussian),
                    ("gamma", 3) => Domain::Continuous(SufficientStatistic::Gamma),
                    _ => return Err(perr(line, format!("unknown domain `{}`", toks[2..].join(" ")))),
                };
                if vars.insert(name.to_string(), b.variable(name, domain)).is_some() {
                    return Err(perr(line, format!("variable `{name}` declared twice")));
                }
            }
            "factor" => {
                if toks.len() < 3 {
                    return Err(perr(line, "expected `factor <id> <kind> ...`"));
                }
                let name = toks[1];
                let rest = &toks[3..];
                let split = rest.iter().position(|t| t.parse::<f64>().is_ok()).unwrap_or(rest.len());
                let args = rest[..split].iter().map(|t| lookup(t)).collect::<Result<Vec<_>>>()?;
                let nums = rest[split..]
                    .iter()
                    .map(|t| number::<T>(line, t))
                    .collect::<Result<Vec<_>>>()?;
                let want = |n: usize| {
                    if nums.len() == n {
                        Ok(())
                    } else {
                        Err(perr(
                            line,
                            format!("`{}` expects {n} numbers, found {}", toks[2], nums.len()),
                        ))
                    }
                };
                let kind = match toks[2] {
                    "table" => FactorKind::Table(nums.clone()),
                    "gaussian" => {
                        want(3)?;
                        FactorKind::LogDensity(LogDensity::exp_family(ExpFamilyDensity::complex_gaussian(
                            Complex::new(nums[0], nums[1]),
                            nums[2],
                        )))
                    }
                    "bg-prior" => {
                        want(2)?;
                        FactorKind::LogDensity(LogDensity::prior(
                            GenericPrior::bernoulli_gaussian(nums[0], nums[1])?,
                            0,
                        ))
                    }
                    "likelihood" => {
                        want(3)?;
                        FactorKind::GaussianLikelihood {
                            y: Complex::new(nums[0], nums[1]),
                            precision: Some(nums[2]),
                        }
                    }
                    "linear" => {
                        want(2 * args.len().saturating_sub(1))?;
                        FactorKind::LinearDelta(nums.chunks(2).map(|c| Complex::new(c[0], c[1])).collect())
                    }
                    other => return Err(perr(line, format!("unknown factor kind `{other}`"))),
                };
                if factors.insert(name.to_string(), b.factor(name, &args, kind)).is_some() {
                    return Err(perr(line, format!("factor `{name}` declared twice")));
                }
            }
            "partition" => {
                if toks.len() < 3 {
                    return Err(perr(line, "expected `partition <factor> <block>|<block>`"));
                }
                let a = *factors
                    .get(toks[1])
                    .ok_or_else(|| perr(line, format!("unknown factor `{}`", toks[1])))?;
                let joined = toks[2..].join(" ");
                let blocks = joined
                    .split('|')
                    .map(|blk| blk.split_whitespace().map(lookup).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                b.partition(a, blocks);
            }
            "constraint" => {
                let (name, kind) = match toks.as_slice() {
                    [_, name, kind] => (*name, *kind),
                    _ => return Err(perr(line, "expected `constraint <var> marg|moments`")),
                };
                let i = lookup(name)?;
                let c = match kind {
                    "marg" => EdgeConstraint::MarginalizationConsistency,
                    "moments" => EdgeConstraint::MomentMatching(b.variables[i].domain.statistic()),
                    other => return Err(perr(line, format!("unknown constraint `{other}`"))),
                };
                b.constraint(i, c);
            }
            "pointmass" => {
                let (name, init) = match toks.as_slice() {
                    [_, name, init] => (*name, *init),
                    _ => return Err(perr(line, "expected `pointmass <var> <initial>`")),
                };
                let i = lookup(name)?;
                b.point_mass(i, number(line, init)?);
            }
            other => return Err(perr(line, format!("unknown directive `{other}`"))),
        }
    }
    b.build()
}

/// Writes a graph back in fixture form. Log-density factors other than
/// complex Gaussian and Bernoulli-Gaussian terms have no textual form.
pub fn write_graph<T: Real>(g: &FactorGraph<T>) -> Result<String> {
    let mut out = String::new();
    let name = |i: VarId| g.variable(i).name.as_str();
    for v in g.variables() {
        let domain = match v.domain {
            Domain::Discrete(k) => format!("discrete {k}"),
            Domain::Continuous(SufficientStatistic::ComplexGaussian) => "gaussian".into(),
            Domain::Continuous(SufficientStatistic::RealGaussian) => "real".into(),
            Domain::Continuous(SufficientStatistic::Gamma) => "gamma".into(),
            Domain::Continuous(s) => return Err(Error::InvalidGraph(format!("no text form for {s} variables"))),
        };
        writeln!(out, "var {} {domain}", v.name).unwrap();
    }
    for (a, f) in g.factors().iter().enumerate() {
        let args: Vec<&str> = f.args.iter().map(|i| name(*i)).collect();
        let nums: Vec<T> = match &f.kind {
            FactorKind::Table(t) => t.clone(),
            FactorKind::GaussianLikelihood { y, precision: Some(p) } => vec![y.re, y.im, *p],
            FactorKind::LinearDelta(c) => c.iter().flat_map(|z| [z.re, z.im]).collect(),
            FactorKind::LogDensity(ld) => match ld.class() {
                Conjugacy::ExpFamily(d) if d.statistic() == SufficientStatistic::ComplexGaussian => {
                    let (m, v) = d.complex_mean_var()?;
                    vec![m.re, m.im, v]
                }
                Conjugacy::Prior {
                    prior: GenericPrior::BernoulliGaussian { rho, v0 },
                    ..
                } => vec![*rho, *v0],
                _ => return Err(Error::InvalidGraph(format!("factor `{}` has no text form", f.name))),
            },
            FactorKind::GaussianLikelihood { precision: None, .. } => {
                return Err(Error::InvalidGraph(format!("factor `{}` has no text form", f.name)))
            }
        };
        let kind = match &f.kind {
            FactorKind::Table(_) => "table",
            FactorKind::GaussianLikelihood { .. } => "likelihood",
            FactorKind::LinearDelta(_) => "linear",
            FactorKind::LogDensity(ld) => match ld.class() {
                Conjugacy::ExpFamily(_) => "gaussian",
                _ => "bg-prior",
            },
        };
        let nums: Vec<String> = nums.iter().map(|x| x.to_string()).collect();
        writeln!(out, "factor {} {kind} {} {}", f.name, args.join(" "), nums.join(" ")).unwrap();
        if !g.is_trivially_partitioned(a) {
            let blocks: Vec<String> = g
                .blocks(a)
                .iter()
                .map(|blk| blk.iter().map(|k| name(f.args[*k])).collect::<Vec<_>>().join(" "))
                .collect();
            writeln!(out, "partition {} {}", f.name, blocks.join(" | ")).unwrap();
        }
    }
    for (i, v) in g.variables().iter().enumerate() {
        if let EdgeConstraint::MomentMatching(_) = g.constraint(i) {
            writeln!(out, "constraint {} moments", v.name).unwrap();
        }
        if let Some(p) = g.point_mass(i) {
            writeln!(out, "pointmass {} {p}", v.name).unwrap();
        }
    }
    Ok(out)
}
