//! Multi-trial experiments: run every method on independent random streams,
//! aggregate squared errors per checkpoint, and write CSV and SVG reports.
//!
//! Trial `t` of every method uses stream `t` under the spec's seed, so
//! methods that share a sampling path (`liso` and `random_search`) see the
//! same samples in the same trial. Trials run on a rayon pool whose size is
//! read from `LISO_WORKERS` (default: all available processors). Results are
//! collected by trial index before folding, so reports do not depend on
//! completion order.

pub mod cli;
pub mod csv_io;
pub mod spec;
pub mod stats;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

pub use csv_io::{emit_csv, parse_csv, read_csv, CsvRow};
pub use spec::ExperimentSpec;
pub use stats::{fit_loglog, LineFit};
pub use svg::emit_svg_plot;

use crate::objectives::ObjectiveError;
use crate::optimizers::{self, Method, OptimizeError, RunOutcome};
use crate::oracle::OracleError;

/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "LISO_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },
    #[error("{method} trial {trial} failed (seed {seed}, stream {trial}): {source}")]
    Trial {
        method: Method,
        trial: u64,
        seed: u64,
        #[source]
        source: OptimizeError,
    },
    #[error("{0}")]
    Fit(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointStats {
    pub n_evals: usize,
    pub mean_mse: f64,
    pub std: f64,
    pub ci_half_width: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: String,
    pub rows: Vec<CheckpointStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub title: String,
    pub seed: u64,
    pub trials: usize,
    /// With one trial the standard deviation is undefined and reported as 0.
    pub single_trial: bool,
    /// Sorted by method name.
    pub methods: Vec<MethodReport>,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// CSV rows: by method name, then by evaluation count.
    pub fn rows(&self) -> Vec<CsvRow> {
        self.methods
            .iter()
            .flat_map(|m| {
                m.rows.iter().map(move |r| CsvRow {
                    method: m.method.clone(),
                    n_evals: r.n_evals as u64,
                    mean_mse: r.mean_mse,
                    std: r.std,
                    ci_half_width: r.ci_half_width,
                    trials: r.trials,
                })
            })
            .collect()
    }

    /// Least-squares slope of `log(mean MSE)` against `log(n)` over the
    /// checkpoints with `lo <= n <= hi`.
    pub fn fit_loglog_slope(&self, method: &str, lo: usize, hi: usize) -> Result<LineFit, HarnessError> {
        let m = self
            .method(method)
            .ok_or_else(|| HarnessError::Fit(format!("no method {method:?} in report")))?;
        let pts: Vec<(f64, f64)> = m
            .rows
            .iter()
            .filter(|r| r.n_evals >= lo && r.n_evals <= hi)
            .map(|r| (r.n_evals as f64, r.mean_mse))
            .collect();
        fit_loglog(&pts)
    }
}

/// Aggregates per-trial squared-error traces that share one checkpoint grid.
pub fn aggregate(method: &str, checkpoints: &[usize], per_trial: &[Vec<f64>]) -> MethodReport {
    let rows = checkpoints
        .iter()
        .enumerate()
        .map(|(i, &n_evals)| {
            let column: Vec<f64> = per_trial.iter().map(|t| t[i]).collect();
            let s = stats::summarize(&column);
            CheckpointStats {
                n_evals,
                mean_mse: s.mean,
                std: s.std,
                ci_half_width: s.ci_half_width,
                trials: s.count,
            }
        })
        .collect();
    MethodReport {
        method: method.to_string(),
        rows,
    }
}

/// Dispatches to the driver for `method`, with trial `stream`.
pub fn run_trial(spec: &ExperimentSpec, method: Method, stream: u64) -> Result<RunOutcome, HarnessError> {
    let objective = spec.build_objective()?;
    let outcome = match method {
        Method::Liso => optimizers::run_liso(&objective, &spec.static_config(stream)),
        Method::RandomSearch => optimizers::run_random_search(&objective, &spec.static_config(stream)),
        Method::AdaptiveLiso => optimizers::run_adaptive_liso(&objective, &spec.adaptive_config(stream)?),
        Method::AdaptiveRandomSearch => {
            optimizers::run_adaptive_random_search(&objective, &spec.adaptive_config(stream)?)
        }
        Method::IsotropicEs => optimizers::run_isotropic_es(&objective, &spec.adaptive_config(stream)?),
    }
    .map_err(|source| HarnessError::Trial {
        method,
        trial: stream,
        seed: spec.seed,
        source,
    })?;
    debug_assert_eq!(objective.evaluations(), spec.budget as u64);
    Ok(outcome)
}

fn worker_count() -> Result<usize, HarnessError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(HarnessError::Config(format!(
                "{WORKERS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let started = Instant::now();
    let checkpoints = spec.checkpoints();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;

    let mut methods: Vec<Method> = spec.methods.clone();
    methods.sort_by_key(|m| m.name());
    methods.dedup();

    let mut reports = Vec::with_capacity(methods.len());
    for method in methods {
        let traces: Vec<Result<Vec<f64>, HarnessError>> = pool.install(|| {
            (0..spec.trials as u64)
                .into_par_iter()
                .map(|t| {
                    let outcome = run_trial(spec, method, t)?;
                    if outcome.trace.checkpoints != checkpoints {
                        return Err(HarnessError::Config(format!(
                            "{method} trial {t}: trace checkpoints differ from the grid"
                        )));
                    }
                    Ok(outcome.trace.squared_errors)
                })
                .collect()
        });
        let traces = traces.into_iter().collect::<Result<Vec<_>, _>>()?;
        reports.push(aggregate(method.name(), &checkpoints, &traces));
    }

    Ok(ExperimentReport {
        title: spec.title(),
        seed: spec.seed,
        trials: spec.trials,
        single_trial: spec.trials == 1,
        methods: reports,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
