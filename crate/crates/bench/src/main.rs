use std::error::Error as _;
use std::path::PathBuf;
use std::process::ExitCode;

use bethe_bench::instance::generate_instance;
use bethe_bench::sweep::{solve, threads_from_env, to_csv};
use bethe_bench::verify::{run_suite, tables};
use bethe_bench::{run_sweep, BenchError, InstanceSpec, Solver, SolverOverrides, Suite, SweepConfig};
use bethe_mp::bethe::{bethe_free_energy, brute_force_log_z, brute_force_marginals, BetheBeliefSet};
use bethe_mp::engine::{complex_summary, format_trace, Belief, Engine, Schedule};
use bethe_mp::graph::parse_graph;
use bethe_mp::sbl::{nmse, read_problem, write_problem, FaultInjection, ProblemFile};
use bethe_mp::Graph;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bethe-bench",
    version,
    about = "Sparse Bayesian learning benchmarks and oracle checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print a summary.
    Solve(SolveArgs),
    /// Sweep solvers over a sparsity grid and write CSV.
    Sweep(SweepArgs),
    /// Run the oracle suites; exits nonzero on any failure.
    Verify(VerifyArgs),
    /// Run the message-passing engine on a graph fixture.
    GraphDemo(GraphArgs),
}

#[derive(Args)]
struct SolverFlags {
    /// Damping κ ∈ (0, 1]; overrides every solver's default.
    #[arg(long)]
    damping: Option<f64>,
    /// Iteration cap (default M).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Tolerance on ‖x̂_new − x̂_old‖∞.
    #[arg(long)]
    tol: Option<f64>,
    /// Averaged-variance correction for amp.
    #[arg(long)]
    finite_n_correction: bool,
}

impl SolverFlags {
    fn overrides(&self) -> SolverOverrides {
        SolverOverrides {
            damping: self.damping,
            max_iter: self.max_iter,
            tol: self.tol,
            finite_n_correction: self.finite_n_correction,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file; without it an instance is generated.
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Write the generated or loaded problem here.
    #[arg(long)]
    save_problem: Option<PathBuf>,
    #[arg(long, default_value = "ep_variant")]
    solver: Solver,
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    m: usize,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 30.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 1.0)]
    v0: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    trial: u32,
    /// How many leading entries of x̂ to print.
    #[arg(long, default_value_t = 8)]
    show: usize,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 250)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    m: usize,
    /// Sparsity grid.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4")]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 30.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 1.0)]
    v0: f64,
    #[arg(long, default_value_t = 50)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "ep_variant,amp")]
    solver: Vec<Solver>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write 0 in the ms column so files are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    FlipBetaSign,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (default: all).
    #[arg(long, value_delimiter = ',')]
    suite: Vec<Suite>,
    #[arg(long, hide = true)]
    inject_fault: Option<Fault>,
}

#[derive(Args)]
struct GraphArgs {
    fixture: PathBuf,
    /// Gauss-Seidel over variables instead of parallel rounds.
    #[arg(long)]
    sequential: bool,
    #[arg(long, default_value_t = 1.0)]
    damping: f64,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Print every message update.
    #[arg(long)]
    trace: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::GraphDemo(a) => cmd_graph_demo(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprint!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprint!(": {s}");
                source = s.source();
            }
            eprintln!();
            ExitCode::from(2)
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<ExitCode, BenchError> {
    let file = match &a.problem {
        Some(path) => read_problem::<f64>(path)?,
        None => {
            let inst = generate_instance(&InstanceSpec {
                n: a.n,
                m: a.m,
                rho: a.rho,
                snr_db: a.snr_db,
                v0: a.v0,
                seed: a.seed,
                rho_index: 0,
                trial: a.trial,
            })?;
            ProblemFile {
                problem: inst.problem,
                truth: Some(inst.x),
            }
        }
    };
    if let Some(path) = &a.save_problem {
        write_problem(path, &file)?;
    }
    let p = &file.problem;
    let r = solve(a.solver, p, file.truth.as_deref(), &a.flags.overrides())?;
    println!("solver      {}", a.solver);
    println!("size        {} x {}", p.n(), p.m());
    println!(
        "iterations  {} ({})",
        r.iterations,
        if r.converged { "converged" } else { "not converged" }
    );
    println!("skips       {}", r.skips);
    if let Some(l) = r.lambda_hat {
        println!("lambda_hat  {l:.6e}");
    }
    if let Some(x) = &file.truth {
        match nmse(&r.x_hat, x) {
            Ok(v) => println!("nmse_db     {:.3}", 10.0 * v.log10()),
            Err(_) => println!("nmse_db     undefined (x = 0)"),
        }
    }
    for (j, v) in r.x_hat.iter().take(a.show).enumerate() {
        println!("x[{j}]  {:+.6} {:+.6}i  var {:.3e}", v.re, v.im, r.var[j]);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode, BenchError> {
    let cfg = SweepConfig {
        template: InstanceSpec {
            n: a.n,
            m: a.m,
            snr_db: a.snr_db,
            v0: a.v0,
            seed: a.seed,
            ..InstanceSpec::default()
        },
        grid: a.rho,
        trials: a.trials,
        solvers: a.solver,
        overrides: a.flags.overrides(),
        out: a.out,
        timing: !a.no_timing,
        threads: threads_from_env()?,
    };
    let records = run_sweep(&cfg)?;
    match &cfg.out {
        Some(path) => eprintln!("wrote {} rows to {}", records.len(), path.display()),
        None => print!("{}", to_csv(&cfg, &records)),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode, BenchError> {
    let suites = if a.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suite
    };
    let fault = a.inject_fault.map(|Fault::FlipBetaSign| FaultInjection::FlipBetaSign);
    let mut ok = true;
    for s in suites {
        let report = run_suite(s, fault);
        println!("{report}");
        ok &= report.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_graph_demo(a: GraphArgs) -> Result<ExitCode, BenchError> {
    let text = std::fs::read_to_string(&a.fixture).map_err(|source| BenchError::Io {
        path: a.fixture.clone(),
        source,
    })?;
    let g: Graph = parse_graph(&text)?;
    let base = if a.sequential {
        Schedule::sequential()
    } else {
        Schedule::default()
    };
    let schedule = Schedule {
        damping: a.damping,
        max_rounds: a.max_rounds,
        tolerance: a.tol,
        trace: a.trace,
        ..base
    };
    let mut e = Engine::new(&g, schedule)?;
    let out = e.run()?;
    if a.trace {
        print!("{}", format_trace(&out.trace));
    }
    println!(
        "rounds {} ({}), skips {}",
        out.rounds,
        if out.converged { "converged" } else { "not converged" },
        out.skips
    );
    for (v, b) in g.variables().iter().zip(&out.beliefs.variables) {
        match b {
            Belief::Table(t) => {
                let cells: Vec<String> = t.iter().map(|p| format!("{p:.6}")).collect();
                println!("{:<12}[{}]", v.name, cells.join(", "));
            }
            Belief::PointMass(x) => println!("{:<12}point mass at {x:.6}", v.name),
            other => match complex_summary(other) {
                Some((m, var)) => println!("{:<12}mean {:+.6} {:+.6}i  var {var:.6e}", v.name, m.re, m.im),
                None => println!("{:<12}{other:?}", v.name),
            },
        }
    }
    if let (true, Some(t)) = (g.is_discrete(), tables(&out.beliefs)) {
        if let (Ok(exact), Ok(log_z)) = (brute_force_marginals(&g), brute_force_log_z(&g)) {
            let gap = t
                .iter()
                .flatten()
                .zip(exact.iter().flatten())
                .fold(0f64, |acc, (x, y)| acc.max((x - y).abs()));
            println!("max |b - p| {gap:.3e}");
            println!("-ln Z       {:.9}", -log_z);
            if let Ok(fb) = BetheBeliefSet::from_beliefs(&g, &out.beliefs).and_then(|s| bethe_free_energy(&s, &g)) {
                println!("F_B         {fb:.9}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
