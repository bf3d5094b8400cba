use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] bethe_mp::Error),

    #[error("unknown solver `{0}` (expected ep, ep_damped, ep_variant, amp, hybrid or genie)")]
    UnknownSolver(String),

    #[error("unknown suite `{0}` (expected tree, vmp, hybrid, mmse, delta or denoiser)")]
    UnknownSuite(String),

    #[error("invalid instance: {0}")]
    InvalidSpec(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("BENCH_THREADS: {0}")]
    Threads(String),

    #[error("{solver} failed at rho = {rho}, trial {trial}: {source}")]
    Trial {
        solver: &'static str,
        rho: f64,
        trial: u32,
        #[source]
        source: bethe_mp::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;
