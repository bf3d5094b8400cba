//! Message passing as constrained Bethe free energy minimization.
//!
//! The crate is organised around the constraint that produces each rule:
//!
//! * [`expfam`]: exponential-family algebra (products, quotients, moment
//!   matching) used as the currency of every continuous message.
//! * [`graph`]: factor graphs annotated with per-factor partitions,
//!   per-variable constraint kinds and point-mass (EM) markers.
//! * [`engine`]: BP, VMP, EP and the hybrid rules on the hyper-variable view.
//! * [`bethe`]: free energies and brute-force oracles for small discrete models.
//! * [`sbl`]: array-based sparse Bayesian learning solvers for `y = Ax + w`.
//!
//! All numerical code is generic over [`Real`] (`f32` / `f64`); the aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the matrix formulas.
#![allow(clippy::needless_range_loop)]

pub mod bethe;
pub mod engine;
mod error;
pub mod expfam;
pub mod graph;
pub mod sbl;
mod scalar;

pub use error::{Error, Result};
pub use num_complex::Complex;
pub use scalar::{abs2, log_sum_exp, xlogx, xlogy_ratio, Real};

pub type C64 = Complex<f64>;
pub type Density = expfam::ExpFamilyDensity<f64>;
pub type Prior = expfam::GenericPrior<f64>;
pub type Graph = graph::FactorGraph<f64>;
pub type Payload = engine::Payload<f64>;
pub type Problem = sbl::SblProblem<f64>;
pub type Solution = sbl::SolverResult<f64>;
pub type Config = sbl::SolverConfig<f64>;
