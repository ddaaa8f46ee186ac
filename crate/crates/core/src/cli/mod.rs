//! The `riesz-dml` command: `estimate`, `simulate`, and `rmd-solve`.
//!
//! Exit codes: 0 on success, 2 for configuration or data errors, 3 when a solver
//! reports infeasibility, 1 otherwise. Errors go to stderr as one line of JSON.
//! `RIESZ_DML_THREADS` caps the worker pool.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Map, Value};

pub use config::{Config, FunctionalSpec};

use crate::dataset::{Dataset, DatasetSummary};
use crate::dictionary::Dictionary;
use crate::dml::{dml_estimate, DmlResult};
use crate::error::{Error, Result};
use crate::rmd::{solve_rmd, Backend, RmdProblem, RmdSolution, SolverOptions, SolverStatus};
use crate::simulation::{run_monte_carlo, write_records_csv, MonteCarloReport};

#[derive(Parser)]
#[command(name = "riesz-dml", version, about = "Debiased estimation of linear functionals with sparse Riesz representers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-fitted estimate and confidence interval from a CSV file.
    Estimate {
        /// CSV file with a header row; overrides `data` in the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// JSON output path; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo experiment on a simulated design.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replication CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve `min ||t||_1  s.t.  ||G t - M||_inf <= lambda, ||t||_1 <= B`.
    RmdSolve {
        /// Symmetric matrix G, one row per line, comma or whitespace separated.
        matrix: PathBuf,
        /// Vector M, comma or whitespace separated.
        vector: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        l1_bound: Option<f64>,
        #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
        backend: BackendArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum BackendArg {
    Auto,
    Simplex,
    FirstOrder,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Simplex => Backend::Simplex,
            BackendArg::FirstOrder => Backend::FirstOrder,
        }
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": "usage", "message": first }));
            return 2;
        }
    };
    match with_thread_cap(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            exit_code(&e)
        }
    }
}

fn with_thread_cap<F: FnOnce() -> Result<i32> + Send>(f: F) -> Result<i32> {
    let threads = match std::env::var("RIESZ_DML_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| Error::config("RIESZ_DML_THREADS", format!("expected a positive integer, got {v:?}")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(f)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::Csv(_) | Error::InvalidDataset(_) | Error::Io(_) => 2,
        Error::FoldSolver {
            status: SolverStatus::Infeasible,
            ..
        } => 3,
        _ => 1,
    }
}

fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::Config { .. } => "config",
        Error::Csv(_) | Error::InvalidDataset(_) => "data",
        Error::Io(_) => "io",
        Error::FoldSolver { .. } => "solver",
        _ => "estimation",
    };
    let mut obj = Map::new();
    obj.insert("error".into(), kind.into());
    if let Error::Config { key, .. } = e {
        obj.insert("key".into(), key.clone().into());
    }
    if let Error::FoldSolver { fold, nuisance, status } = e {
        obj.insert("fold".into(), (*fold).into());
        obj.insert("nuisance".into(), (*nuisance).into());
        obj.insert("status".into(), status.to_string().into());
    }
    obj.insert("message".into(), e.to_string().into());
    Value::Object(obj)
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Estimate { data, config, out } => estimate(data, &config, out),
        Command::Simulate { config, out, csv } => simulate(&config, out, csv),
        Command::RmdSolve {
            matrix,
            vector,
            lambda,
            l1_bound,
            backend,
            out,
        } => rmd_solve(&matrix, &vector, lambda, l1_bound, backend, out),
    }
}

// Paths in a config file are relative to the file's directory.
fn config_relative(config_path: &Path, p: &Path) -> PathBuf {
    match config_path.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = crate::json::to_string(value)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    command: &'static str,
    config: &'a Config,
    data: DatasetSummary,
    #[serde(flatten)]
    result: &'a DmlResult,
}

fn estimate(data: Option<PathBuf>, config_path: &Path, out: Option<PathBuf>) -> Result<i32> {
    let config = Config::from_path(config_path)?;
    let data_path = match (data, &config.data) {
        (Some(p), _) => p,
        (None, Some(p)) => config_relative(config_path, p),
        (None, None) => return Err(Error::config("data", "no data file given in the config or with --data")),
    };
    let outcome = config
        .outcome
        .as_deref()
        .ok_or_else(|| Error::config("outcome", "missing required key"))?;
    let mut dataset = Dataset::from_csv_path(&data_path, outcome, config.treatment.as_deref())?;
    if config.standardize {
        dataset = dataset.standardized();
    }
    let dict = Dictionary::new(config.dictionary.clone(), dataset.dim())
        .map_err(|e| Error::config("dictionary", e.to_string()))?;
    let functional = config.functional.resolve(dataset.dim(), dataset.treatment_col())?;
    functional
        .check_data(&dict, &dataset)
        .map_err(|e| Error::config("functional", e.to_string()))?;
    let result = dml_estimate(&dataset, &dict, &functional, &config.dml_options())?;
    let output = EstimateOutput {
        command: "estimate",
        config: &config,
        data: DatasetSummary::from(&dataset),
        result: &result,
    };
    let out_path = out.or_else(|| config.output.as_ref().map(|p| config_relative(config_path, p)));
    emit(&output, out_path.as_deref())?;
    Ok(0)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    command: &'static str,
    config: &'a Config,
    #[serde(flatten)]
    report: &'a MonteCarloReport,
}

fn simulate(config_path: &Path, out: Option<PathBuf>, csv: Option<PathBuf>) -> Result<i32> {
    let config = Config::from_path(config_path)?;
    let experiment = config.experiment()?;
    let report = run_monte_carlo(&experiment).map_err(|e| match e {
        Error::Incompatible(m) => Error::config("functional", m),
        other => other,
    })?;
    let out_path = out.or_else(|| config.output.as_ref().map(|p| config_relative(config_path, p)));
    let csv_path = csv.or_else(|| config.csv.as_ref().map(|p| config_relative(config_path, p)));
    emit(
        &SimulateOutput {
            command: "simulate",
            config: &config,
            report: &report,
        },
        out_path.as_deref(),
    )?;
    if let Some(p) = csv_path {
        write_records_csv(&report.records, std::fs::File::create(p)?)?;
    }
    Ok(0)
}

fn read_numbers(path: &Path, key: &str) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(key, format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::config(key, format!("not a finite number: {t:?}")))
                })
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct RmdSolveConfig<'a> {
    matrix: &'a Path,
    vector: &'a Path,
    lambda: f64,
    l1_bound: Option<f64>,
    backend: BackendArg,
}

#[derive(Serialize)]
struct RmdSolveOutput<'a> {
    command: &'static str,
    config: RmdSolveConfig<'a>,
    #[serde(flatten)]
    solution: &'a RmdSolution,
}

fn rmd_solve(
    matrix: &Path,
    vector: &Path,
    lambda: f64,
    l1_bound: Option<f64>,
    backend: BackendArg,
    out: Option<PathBuf>,
) -> Result<i32> {
    let rows = read_numbers(matrix, "matrix")?;
    let m: Vec<f64> = read_numbers(vector, "vector")?.into_iter().flatten().collect();
    let p = m.len();
    if p == 0 {
        return Err(Error::config("vector", "empty vector"));
    }
    if rows.len() != p || rows.iter().any(|r| r.len() != p) {
        return Err(Error::config("matrix", format!("expected a {p} x {p} matrix to match the vector")));
    }
    let g = DMatrix::from_row_iterator(p, p, rows.into_iter().flatten());
    let prob = RmdProblem::new(g, DVector::from_vec(m), lambda, l1_bound.unwrap_or(f64::INFINITY))
        .map_err(|e| Error::config("matrix", e.to_string()))?;
    let opts = SolverOptions {
        backend: backend.into(),
        ..SolverOptions::default()
    };
    let solution = solve_rmd(&prob, &opts);
    let output = RmdSolveOutput {
        command: "rmd-solve",
        config: RmdSolveConfig {
            matrix,
            vector,
            lambda,
            l1_bound,
            backend,
        },
        solution: &solution,
    };
    emit(&output, out.as_deref())?;
    Ok(match solution.status {
        SolverStatus::Optimal => 0,
        SolverStatus::Infeasible => {
            eprintln!("{}", json!({ "error": "solver", "status": "infeasible", "message": "the RMD program is infeasible" }));
            3
        }
        SolverStatus::IterationLimit => {
            eprintln!("{}", json!({ "error": "solver", "status": "iteration_limit", "message": "iteration limit reached" }));
            1
        }
    })
}
