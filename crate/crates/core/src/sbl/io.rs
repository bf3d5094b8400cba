use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{CMatrix, HierarchicalGamma, SblPrior, SblProblem};
use crate::expfam::GenericPrior;
use crate::{Error, Real, Result};

const FORMAT: &str = "bethe-sbl-problem";
const VERSION: u32 = 1;

/// A problem plus, for synthetic instances, the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile<T> {
    pub problem: SblProblem<T>,
    pub truth: Option<Vec<Complex<T>>>,
}

#[derive(Serialize, Deserialize)]
struct Raw {
    format: String,
    version: u32,
    n: usize,
    m: usize,
    /// Row-major `[re, im]` pairs.
    a: Vec<[f64; 2]>,
    y: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
}

fn to_complex<T: Real>(v: &[[f64; 2]]) -> Vec<Complex<T>> {
    v.iter()
        .map(|[re, im]| Complex::new(T::lit(*re), T::lit(*im)))
        .collect()
}

fn from_complex<T: Real>(v: &[Complex<T>]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re.as_f64(), z.im.as_f64()]).collect()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ProblemFile(msg.into())
}

impl<T: Real> ProblemFile<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Raw = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if raw.format != FORMAT {
            return Err(bad(format!("format `{}` is not `{FORMAT}`", raw.format)));
        }
        if raw.version != VERSION {
            return Err(bad(format!("unsupported version {}", raw.version)));
        }
        if raw.a.len() != raw.n * raw.m {
            return Err(bad(format!("A has {} entries for {}×{}", raw.a.len(), raw.n, raw.m)));
        }
        let a = CMatrix::from_row_major(raw.n, raw.m, to_complex(&raw.a))?;
        let y = to_complex(&raw.y);
        let truth = raw.x.as_deref().map(to_complex::<T>);
        if let Some(x) = &truth {
            if x.len() != raw.m {
                return Err(bad(format!("x has {} entries for {} unknowns", x.len(), raw.m)));
            }
        }
        let prior = match (raw.lambda, raw.rho, raw.v0, raw.alpha) {
            (None, None, None, None) => SblPrior::Hierarchical(HierarchicalGamma::default()),
            (Some(_), Some(rho), Some(v0), None) => {
                SblPrior::Known(GenericPrior::bernoulli_gaussian(T::lit(rho), T::lit(v0))?)
            }
            (Some(_), None, None, Some(alpha)) => SblPrior::Known(GenericPrior::zero_mean_gaussian(
                alpha.into_iter().map(T::lit).collect(),
            )?),
            _ => {
                return Err(bad(
                    "give lambda with either rho and v0 or alpha, or none of them for the hierarchical prior",
                ))
            }
        };
        let problem = SblProblem::new(a, y, raw.lambda.map(T::lit), prior)?;
        Ok(Self { problem, truth })
    }

    pub fn to_json(&self) -> Result<String> {
        let p = &self.problem;
        let (rho, v0, alpha) = match &p.prior {
            SblPrior::Known(GenericPrior::BernoulliGaussian { rho, v0 }) => {
                (Some(rho.as_f64()), Some(v0.as_f64()), None)
            }
            SblPrior::Known(GenericPrior::ZeroMeanGaussianVec { alpha }) => {
                (None, None, Some(alpha.iter().map(|v| v.as_f64()).collect()))
            }
            SblPrior::Hierarchical(h) if *h == HierarchicalGamma::default() => (None, None, None),
            SblPrior::Hierarchical(_) => return Err(bad("only the default hierarchical prior is serializable")),
        };
        let raw = Raw {
            format: FORMAT.into(),
            version: VERSION,
            n: p.n(),
            m: p.m(),
            a: from_complex(p.a.data()),
            y: from_complex(&p.y),
            x: self.truth.as_deref().map(from_complex),
            lambda: p.lambda.map(|l| l.as_f64()),
            rho,
            v0,
            alpha,
        };
        serde_json::to_string(&raw).map_err(|e| bad(e.to_string()))
    }
}

pub fn read_problem<T: Real>(path: &Path) -> Result<ProblemFile<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    ProblemFile::from_json(&text)
}

pub fn write_problem<T: Real>(path: &Path, file: &ProblemFile<T>) -> Result<()> {
    std::fs::write(path, file.to_json()?).map_err(|e| bad(format!("{}: {e}", path.display())))
}
