use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use trace_bench::{emit_csv, prepare_source, run_sweep_on, write_csv, ExperimentSpec, MatrixSource};
use trace_core::matfunc::DEFAULT_LANCZOS_ITERATIONS;
use trace_core::EstimatorKind;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    #[value(name = "power_law")]
    PowerLaw,
    #[value(name = "kernel_logdet")]
    KernelLogdet,
    #[value(name = "graph_estrada")]
    GraphEstrada,
    #[value(name = "graph_triangles")]
    GraphTriangles,
}

/// Median relative error versus query budget for randomized trace estimators.
#[derive(Debug, Parser)]
#[command(name = "trace-bench", version)]
struct Args {
    #[arg(long, value_enum)]
    source: Source,
    /// Power-law decay exponent.
    #[arg(long)]
    c: Option<f64>,
    /// Power-law dimension.
    #[arg(long, default_value_t = 1000)]
    d: usize,
    /// Number of synthetic kernel points when no --points file is given.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Kernel width in exp(-gamma |x - y|^2).
    #[arg(long, default_value_t = 64.0)]
    gamma: f64,
    /// Diagonal shift in log(B + lambda I).
    #[arg(long, default_value_t = 0.008)]
    lambda: f64,
    /// File of `x y` coordinates for the kernel source.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Edge-list file for the graph sources.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LANCZOS_ITERATIONS)]
    lanczos_iters: usize,
    /// Comma-separated estimator names.
    #[arg(long, value_delimiter = ',', required = true)]
    estimators: Vec<String>,
    /// Comma-separated ascending budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subspace iterations for subspace_projection.
    #[arg(long, default_value_t = 1)]
    q: usize,
    /// Lift the node limit on the exact triangle count.
    #[arg(long)]
    allow_large: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_spec(args: &Args) -> Result<ExperimentSpec, String> {
    let graph = || {
        args.graph
            .clone()
            .ok_or_else(|| "graph sources need --graph".to_string())
    };
    let source = match args.source {
        Source::PowerLaw => MatrixSource::PowerLaw {
            c: args.c.ok_or("power_law needs --c")?,
            d: args.d,
        },
        Source::KernelLogdet => MatrixSource::KernelLogdet {
            n: args.n,
            gamma: args.gamma,
            lambda: args.lambda,
            iterations: args.lanczos_iters,
            points: args.points.clone(),
        },
        Source::GraphEstrada => MatrixSource::GraphEstrada {
            path: graph()?,
            iterations: args.lanczos_iters,
        },
        Source::GraphTriangles => MatrixSource::GraphTriangles {
            path: graph()?,
            allow_large: args.allow_large,
        },
    };
    let estimators = args
        .estimators
        .iter()
        .map(|s| s.parse::<EstimatorKind>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = ExperimentSpec::new(
        source,
        estimators,
        args.budgets.clone(),
        args.trials,
        args.seed,
    );
    spec.subspace_iterations = args.q;
    Ok(spec)
}

fn run(args: &Args) -> Result<usize, String> {
    let spec = build_spec(args)?;
    spec.validate().map_err(|e| e.to_string())?;
    let prepared = prepare_source(&spec.source, spec.seed).map_err(|e| e.to_string())?;
    for note in &prepared.notes {
        eprintln!("note: {note}");
    }
    let report = run_sweep_on(&prepared, &spec).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => emit_csv(&report.stats, path),
        None => write_csv(&report.stats, std::io::stdout().lock()),
    }
    .map_err(|e| e.to_string())?;
    for f in &report.failures {
        eprintln!("error: {} at m={}: {}", f.estimator, f.m, f.message);
    }
    Ok(report.failures.len())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("trace-bench: {n} cell(s) failed; the CSV holds the rest");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("trace-bench: {e}");
            ExitCode::FAILURE
        }
    }
}
