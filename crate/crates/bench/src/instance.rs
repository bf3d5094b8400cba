use bethe_mp::expfam::GenericPrior;
use bethe_mp::sbl::{CMatrix, HierarchicalGamma, SblPrior};
use bethe_mp::{Problem, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::{BenchError, Result};

/// How substreams are derived; echoed into every CSV header.
pub const RNG_DESCRIPTION: &str = "ChaCha20Rng::seed_from_u64(seed) with stream (rho_index << 32) | trial";

/// One synthetic `y = Ax + w` draw.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub snr_db: f64,
    /// Slab variance.
    pub v0: f64,
    pub seed: u64,
    /// Position of `rho` in the sweep grid.
    pub rho_index: u32,
    pub trial: u32,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            n: 250,
            m: 500,
            rho: 0.1,
            snr_db: 30.0,
            v0: 1.0,
            seed: 0,
            rho_index: 0,
            trial: 0,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(BenchError::InvalidSpec(format!("{}×{} system", self.n, self.m)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(BenchError::InvalidSpec(format!("rho = {} is outside [0, 1]", self.rho)));
        }
        if !(self.v0 > 0.0 && self.v0.is_finite()) {
            return Err(BenchError::InvalidSpec(format!("v0 = {} is not positive", self.v0)));
        }
        if !self.snr_db.is_finite() {
            return Err(BenchError::InvalidSpec(format!("snr_db = {}", self.snr_db)));
        }
        Ok(())
    }

    /// `σ² = (M/N) ρ v₀ / 10^(SNR/10)`, the analytic `E|[Ax]_n|²` over the
    /// target SNR. At ρ = 0 the power of a single active entry stands in.
    pub fn noise_variance(&self) -> f64 {
        let rho = if self.rho > 0.0 { self.rho } else { 1.0 / self.m as f64 };
        (self.m as f64 / self.n as f64) * rho * self.v0 / 10f64.powf(self.snr_db / 10.0)
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.rho_index) << 32) | u64::from(self.trial));
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Known-model problem with the true Bernoulli-Gaussian prior and `λ = 1/σ²`.
    pub problem: Problem,
    pub x: Vec<C64>,
    pub noise_variance: f64,
}

impl Instance {
    pub fn support(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|j| self.x[*j].norm() > 0.0).collect()
    }
}

/// The same observations with unknown noise and the default hierarchical prior.
pub fn blind(p: &Problem) -> Problem {
    Problem {
        lambda: None,
        prior: SblPrior::Hierarchical(HierarchicalGamma::default()),
        ..p.clone()
    }
}

/// A draw from `CN(0, var)`.
pub fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    C64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Draws A row-major, then x, then w, all from the spec's substream.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = spec.rng();
    let a = CMatrix::from_fn(spec.n, spec.m, |_, _| cn(&mut rng, 1.0 / spec.n as f64));
    let x: Vec<C64> = (0..spec.m)
        .map(|_| {
            if rng.random::<f64>() < spec.rho {
                cn(&mut rng, spec.v0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let noise_variance = spec.noise_variance();
    let y = a
        .mul_vec(&x)
        .into_iter()
        .map(|v| v + cn(&mut rng, noise_variance))
        .collect();
    let prior = GenericPrior::bernoulli_gaussian(spec.rho, spec.v0)?;
    let problem = Problem::known(a, y, 1.0 / noise_variance, prior)?;
    Ok(Instance {
        problem,
        x,
        noise_variance,
    })
}

/// A small `y = Ax + w` with `x ~ CN(0, diag α)`, `α_m ∈ [0.3, 2)` and
/// `λ ∈ [0.5, 50)`, under the matching Gaussian prior.
pub fn gaussian_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Result<Problem> {
    let a = CMatrix::from_fn(n, m, |_, _| cn(rng, 1.0 / n as f64));
    let alpha: Vec<f64> = (0..m).map(|_| rng.random_range(0.3..2.0)).collect();
    let lambda = rng.random_range(0.5..50.0);
    let x: Vec<C64> = alpha.iter().map(|v| cn(rng, *v)).collect();
    let y = a.mul_vec(&x).into_iter().map(|v| v + cn(rng, 1.0 / lambda)).collect();
    Ok(Problem::known(a, y, lambda, GenericPrior::zero_mean_gaussian(alpha)?)?)
}
