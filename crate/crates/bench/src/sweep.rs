use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use bethe_mp::sbl::{genie_lmmse, nmse, nmse_db, solve_amp, solve_ep, solve_ep_variant, solve_hybrid, SblPrior};
use bethe_mp::{Config, Prior, Problem, Solution, C64};
use rayon::prelude::*;

use crate::instance::{blind, generate_instance, Instance, InstanceSpec, RNG_DESCRIPTION};
use crate::{BenchError, Result};

pub const CSV_COLUMNS: &str = "solver,rho,trials,nmse_db,mean_iters,skip_rate,ms";

/// Damping of `ep_damped` unless overridden.
pub const DEFAULT_EP_DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Solver {
    /// Parallel EP with explicit cavities.
    Ep,
    /// The same with κ = 0.5.
    EpDamped,
    /// Shared-residual EP.
    EpVariant,
    Amp,
    /// EM-VMP with unknown noise and the hierarchical prior.
    Hybrid,
    /// LMMSE on the true support.
    Genie,
}

impl Solver {
    pub const ALL: [Solver; 6] = [
        Solver::Ep,
        Solver::EpDamped,
        Solver::EpVariant,
        Solver::Amp,
        Solver::Hybrid,
        Solver::Genie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Ep => "ep",
            Solver::EpDamped => "ep_damped",
            Solver::EpVariant => "ep_variant",
            Solver::Amp => "amp",
            Solver::Hybrid => "hybrid",
            Solver::Genie => "genie",
        }
    }
}

impl FromStr for Solver {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| BenchError::UnknownSolver(s.to_owned()))
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Command-line overrides of the solver defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverOverrides {
    /// Applies to every iterative solver, `ep_damped` included.
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub finite_n_correction: bool,
}

impl SolverOverrides {
    pub fn config(&self, solver: Solver) -> Config {
        let defaults = Config::default();
        Config {
            damping: match (self.damping, solver) {
                (Some(k), _) => k,
                (None, Solver::EpDamped) => DEFAULT_EP_DAMPING,
                (None, _) => 1.0,
            },
            max_iter: self.max_iter,
            tol: self.tol.unwrap_or(defaults.tol),
            finite_n_correction: self.finite_n_correction && solver == Solver::Amp,
            ..defaults
        }
    }

    fn describe(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "default".into());
        format!(
            "damping={} max_iter={} tol={} finite_n_correction={}",
            opt(self.damping.map(|v| v.to_string())),
            opt(self.max_iter.map(|v| v.to_string())),
            opt(self.tol.map(|v| v.to_string())),
            self.finite_n_correction
        )
    }
}

/// What one solver did on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    /// `None` when the true x is all zero.
    pub nmse: Option<f64>,
    pub iterations: usize,
    pub skips: usize,
    pub ms: f64,
}

/// Runs one solver. `genie` needs the truth for its support; `hybrid`
/// discards a known noise level and prior.
pub fn solve(
    solver: Solver,
    problem: &Problem,
    truth: Option<&[C64]>,
    overrides: &SolverOverrides,
) -> bethe_mp::Result<Solution> {
    let cfg = overrides.config(solver);
    match solver {
        Solver::Ep | Solver::EpDamped => solve_ep(problem, &cfg),
        Solver::EpVariant => solve_ep_variant(problem, &cfg),
        Solver::Amp => solve_amp(problem, &cfg),
        Solver::Hybrid => solve_hybrid(&blind(problem), &cfg),
        Solver::Genie => {
            let (Some(x), Some(lambda), SblPrior::Known(Prior::BernoulliGaussian { v0, .. })) =
                (truth, problem.lambda, &problem.prior)
            else {
                return Err(bethe_mp::Error::InvalidParameter {
                    name: "genie",
                    reason: "needs the true x, a known noise level and a Bernoulli-Gaussian prior".into(),
                });
            };
            let support: Vec<usize> = (0..x.len()).filter(|j| x[*j].norm() > 0.0).collect();
            let x_hat = genie_lmmse(&problem.a, &problem.y, lambda, *v0, &support)?;
            Ok(Solution {
                var: vec![0.0; x_hat.len()],
                x_hat,
                iterations: 0,
                converged: true,
                residuals: Vec::new(),
                lambda_hat: None,
                alpha_hat: None,
                epsilons: Vec::new(),
                skips: 0,
                trajectory: Vec::new(),
            })
        }
    }
}

pub fn run_trial(solver: Solver, inst: &Instance, overrides: &SolverOverrides) -> bethe_mp::Result<TrialOutcome> {
    let start = Instant::now();
    let r = solve(solver, &inst.problem, Some(&inst.x), overrides)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let nmse = match nmse(&r.x_hat, &inst.x) {
        Ok(v) => Some(v),
        Err(bethe_mp::Error::ZeroReference) => None,
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome {
        nmse,
        iterations: r.iterations,
        skips: r.skips,
        ms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Size, SNR, slab variance and seed; `rho`, `rho_index` and `trial` are
    /// set per run.
    pub template: InstanceSpec,
    pub grid: Vec<f64>,
    pub trials: u32,
    pub solvers: Vec<Solver>,
    pub overrides: SolverOverrides,
    pub out: Option<PathBuf>,
    /// Off writes 0 in the `ms` column so whole files are reproducible.
    pub timing: bool,
    /// Worker count; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            template: InstanceSpec::default(),
            grid: vec![0.1, 0.2, 0.3, 0.4],
            trials: 50,
            solvers: vec![Solver::EpVariant, Solver::Amp],
            overrides: SolverOverrides::default(),
            out: None,
            timing: true,
            threads: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(BenchError::InvalidSweep("empty sparsity grid".into()));
        }
        if self.solvers.is_empty() {
            return Err(BenchError::InvalidSweep("no solvers".into()));
        }
        if self.trials == 0 {
            return Err(BenchError::InvalidSweep("zero trials".into()));
        }
        if self.grid.len() > u32::MAX as usize {
            return Err(BenchError::InvalidSweep("grid too long".into()));
        }
        for rho in &self.grid {
            InstanceSpec {
                rho: *rho,
                ..self.template.clone()
            }
            .validate()?;
        }
        for s in &self.solvers {
            self.overrides.config(*s).validate()?;
        }
        Ok(())
    }
}

/// One row of the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub solver: Solver,
    pub rho: f64,
    /// Trials with a nonzero x, the ones that define an NMSE.
    pub trials: usize,
    pub nmse_db: f64,
    pub mean_iters: f64,
    /// Skipped updates per `iterations · N · M`.
    pub skip_rate: f64,
    /// Mean wall-clock per trial.
    pub ms: f64,
}

/// Reads `BENCH_THREADS`.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("BENCH_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(BenchError::Threads(e.to_string())),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) | Err(_) => Err(BenchError::Threads(format!("`{s}` is not a positive integer"))),
            Ok(n) => Ok(Some(n)),
        },
    }
}

fn run_cell(cfg: &SweepConfig, rho_index: usize, trial: u32) -> Result<Vec<TrialOutcome>> {
    let rho = cfg.grid[rho_index];
    let spec = InstanceSpec {
        rho,
        rho_index: rho_index as u32,
        trial,
        ..cfg.template.clone()
    };
    let inst = generate_instance(&spec)?;
    cfg.solvers
        .iter()
        .map(|s| {
            run_trial(*s, &inst, &cfg.overrides).map_err(|source| BenchError::Trial {
                solver: s.name(),
                rho,
                trial,
                source,
            })
        })
        .collect()
}

/// Runs every solver on the same instances for each grid point, then writes
/// the CSV to `cfg.out` if set.
///
/// Each `(rho_index, trial)` cell owns its substream, and outcomes are
/// reduced in trial order, so results do not depend on the worker count.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let cells: Vec<(usize, u32)> = (0..cfg.grid.len())
        .flat_map(|r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    let work = || -> Result<Vec<Vec<TrialOutcome>>> { cells.par_iter().map(|(r, t)| run_cell(cfg, *r, *t)).collect() };
    let outcomes = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::Threads(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let (n, m) = (cfg.template.n as f64, cfg.template.m as f64);
    let mut records = Vec::new();
    for (r, rho) in cfg.grid.iter().enumerate() {
        let cell = &outcomes[r * cfg.trials as usize..(r + 1) * cfg.trials as usize];
        for (k, solver) in cfg.solvers.iter().enumerate() {
            let runs: Vec<&TrialOutcome> = cell.iter().map(|c| &c[k]).collect();
            let values: Vec<f64> = runs.iter().filter_map(|o| o.nmse).collect();
            let iters: usize = runs.iter().map(|o| o.iterations).sum();
            let skips: usize = runs.iter().map(|o| o.skips).sum();
            let count = runs.len() as f64;
            records.push(SweepRecord {
                solver: *solver,
                rho: *rho,
                trials: values.len(),
                nmse_db: nmse_db(&values),
                mean_iters: iters as f64 / count,
                skip_rate: if iters == 0 {
                    0.0
                } else {
                    skips as f64 / (iters as f64 * n * m)
                },
                ms: if cfg.timing {
                    runs.iter().map(|o| o.ms).sum::<f64>() / count
                } else {
                    0.0
                },
            });
        }
    }
    if let Some(path) = &cfg.out {
        write_atomic(path, &to_csv(cfg, &records))?;
    }
    Ok(records)
}

pub fn to_csv(cfg: &SweepConfig, records: &[SweepRecord]) -> String {
    let t = &cfg.template;
    let join = |v: Vec<String>| v.join(";");
    let mut s = String::new();
    let _ = writeln!(s, "# bethe-bench sweep");
    let _ = writeln!(
        s,
        "# n={} m={} snr_db={} v0={} seed={} trials={} grid={}",
        t.n,
        t.m,
        t.snr_db,
        t.v0,
        t.seed,
        cfg.trials,
        join(cfg.grid.iter().map(|r| r.to_string()).collect())
    );
    let _ = writeln!(
        s,
        "# solvers={} {}",
        join(cfg.solvers.iter().map(|v| v.to_string()).collect()),
        cfg.overrides.describe()
    );
    let _ = writeln!(s, "# rng: {RNG_DESCRIPTION}");
    let _ = writeln!(
        s,
        "# snr = E|[Ax]_n|^2 / sigma^2 with the analytic signal power (M/N) rho v0 (rho = 1/M at rho = 0)"
    );
    let _ = writeln!(
        s,
        "# nmse_db = 10 log10 of the mean linear NMSE over trials with nonzero x"
    );
    let _ = writeln!(
        s,
        "# skip_rate = skipped updates / (iterations N M); ms = mean wall-clock per trial"
    );
    let _ = writeln!(s, "{CSV_COLUMNS}");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.3},{:.6e},{:.3}",
            r.solver, r.rho, r.trials, r.nmse_db, r.mean_iters, r.skip_rate, r.ms
        );
    }
    s
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let io = |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
