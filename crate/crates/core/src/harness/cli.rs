//! Command-line front end.
//!
//! ```text
//! liso optimize --fn sphere --d 2 --method liso --n 1000 --seed 7
//! liso optimize --external "python3 f.py" --d 3 --method adaptive_liso --n 9000
//! liso bench configs/sphere_d4_static.toml --trials 20 --out-dir out
//! liso oracle --fn quad-cubic --alpha 16
//! liso oracle --fn quad-cubic --alphas 4,8,16,32,64
//! liso slope out/sphere_d4_static.csv --method liso --from 1000 --to 100000
//! ```
//!
//! Exit status is 0 on success, 2 for usage and configuration errors, 1 when
//! a run fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{emit_csv, emit_svg_plot, read_csv, run_experiment, stats, ExperimentSpec, HarnessError};
use crate::distributions::IsotropicGaussian;
use crate::objectives::{external_objective, ExternalCommand, Objective, QUAD_CUBIC_DOMAIN};
use crate::optimizers::{self, AdaptiveConfig, BoxDomain, Method, StaticConfig, Temperature};
use crate::oracle::{self, QuadratureSpec, DEFAULT_HALF_WIDTH, DEFAULT_POINTS};

#[derive(Debug, Parser)]
#[command(
    name = "liso",
    version,
    about = "Laplace importance sampling optimizers and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one method on one objective and print the estimate.
    Optimize(OptimizeArgs),
    /// Run an experiment spec and write its CSV and SVG.
    Bench(BenchArgs),
    /// Gibbs mean or Laplace gaps by quadrature (d <= 2).
    Oracle(OracleArgs),
    /// Log-log slope of mean MSE against n from a report CSV.
    Slope(SlopeArgs),
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    /// Built-in objective: sphere, rastrigin, ackley or quad-cubic.
    #[arg(
        long = "fn",
        value_name = "NAME",
        conflicts_with = "external",
        required_unless_present = "external"
    )]
    function: Option<String>,
    /// Command line of an external objective process.
    #[arg(long, value_name = "COMMAND")]
    external: Option<String>,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value = "liso")]
    method: Method,
    /// Evaluation budget.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Temperature schedule constant.
    #[arg(long, conflicts_with = "alpha")]
    alpha0: Option<f64>,
    /// Fixed temperature.
    #[arg(long)]
    alpha: Option<f64>,
    /// Mean of the initial proposal, comma separated (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Option<Vec<f64>>,
    /// Variance of the initial proposal (default: 1/d).
    #[arg(long)]
    variance: Option<f64>,
    /// Known minimizer, used to report the squared error.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    minimizer: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    mixture_weight: f64,
    /// Adapted proposal variance (default: 1/d).
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 300)]
    batch_size: usize,
    /// Clamp the adapted mean to [LO, HI] in every coordinate.
    #[arg(long, value_delimiter = ',', num_args = 2, value_names = ["LO", "HI"], allow_hyphen_values = true)]
    projection_box: Option<Vec<f64>>,
    /// Use the raw (unnormalized) ES recombination weights.
    #[arg(long)]
    raw_es_weights: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    config: PathBuf,
    /// Override the trial count in the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Write outputs here, keeping the configured file names.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long = "fn", value_name = "NAME")]
    function: String,
    /// Dimension, 1 or 2.
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Print the Gibbs mean at this temperature.
    #[arg(long, required_unless_present = "alphas", conflicts_with = "alphas")]
    alpha: Option<f64>,
    /// Print the Laplace gap at each temperature, then the fitted slope.
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    /// Box bounds (default: the objective's domain, else [-8, 8]).
    #[arg(long, allow_hyphen_values = true)]
    lo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hi: Option<f64>,
    /// Grid points per axis (odd).
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    /// Allowed change under grid refinement.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct SlopeArgs {
    csv: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 1000)]
    from: u64,
    #[arg(long, default_value_t = u64::MAX, hide_default_value = true)]
    to: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Optimize(a) => optimize(a, &mut out),
        Command::Bench(a) => bench(a, &mut out),
        Command::Oracle(a) => oracle_cmd(a, &mut out),
        Command::Slope(a) => slope(a, &mut out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            exit_code(&e)
        }
    }
}

fn one_line(e: &HarnessError) -> String {
    e.to_string().lines().map(str::trim).collect::<Vec<_>>().join(" ")
}

fn exit_code(e: &HarnessError) -> i32 {
    match e {
        HarnessError::Config(_) | HarnessError::Io { .. } | HarnessError::Csv { .. } => 2,
        HarnessError::Optimize(optimizers::OptimizeError::InvalidConfig(_)) => 2,
        HarnessError::Trial {
            source: optimizers::OptimizeError::InvalidConfig(_),
            ..
        } => 2,
        _ => 1,
    }
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn write_out(out: &mut dyn Write, text: std::fmt::Arguments) -> Result<(), HarnessError> {
    out.write_fmt(text)
        .map_err(|e| HarnessError::io(std::path::Path::new("<stdout>"), e))
}

fn format_vector(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

fn optimize(a: OptimizeArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    if a.d == 0 {
        return Err(usage("--d must be at least 1"));
    }
    let mut objective = match (&a.function, &a.external) {
        (Some(name), None) => Objective::builtin(name, a.d).map_err(|e| usage(e.to_string()))?,
        (None, Some(line)) => {
            let command = ExternalCommand::parse(line).map_err(|e| usage(e.to_string()))?;
            external_objective(command, a.d)?
        }
        _ => unreachable!("clap enforces exactly one objective"),
    };
    if let Some(m) = a.minimizer {
        if m.len() != a.d {
            return Err(usage(format!(
                "--minimizer has {} coordinates, expected {}",
                m.len(),
                a.d
            )));
        }
        objective = objective.with_minimizer(m);
    }
    let center = a.center.unwrap_or_else(|| vec![0.0; a.d]);
    if center.len() != a.d {
        return Err(usage(format!(
            "--center has {} coordinates, expected {}",
            center.len(),
            a.d
        )));
    }
    let variance = a.variance.unwrap_or(1.0 / a.d as f64);
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(usage("--variance must be positive"));
    }
    let temperature = match a.alpha {
        Some(alpha) => Temperature::Fixed(alpha),
        None => Temperature::Schedule(a.alpha0.unwrap_or(1.0)),
    };
    let q0 = IsotropicGaussian::new(center, variance);
    let projection_box = match a.projection_box.as_deref() {
        Some(&[lo, hi]) => Some(BoxDomain::cube(lo, hi, a.d)?),
        _ => None,
    };
    let adaptive = AdaptiveConfig {
        budget: a.n,
        temperature,
        q0: q0.clone(),
        mixture_weight: a.mixture_weight,
        sigma2: a.sigma2.unwrap_or(1.0 / a.d as f64),
        batch_size: a.batch_size,
        projection_box,
        normalize_es_weights: !a.raw_es_weights,
        seed: a.seed,
        stream: a.stream,
        checkpoints: Some(vec![a.n]),
    };
    let fixed = StaticConfig {
        checkpoints: Some(vec![a.n]),
        stream: a.stream,
        ..adaptive.as_static()
    };
    let outcome = match a.method {
        Method::Liso => optimizers::run_liso(&objective, &fixed),
        Method::RandomSearch => optimizers::run_random_search(&objective, &fixed),
        Method::AdaptiveLiso => optimizers::run_adaptive_liso(&objective, &adaptive),
        Method::AdaptiveRandomSearch => optimizers::run_adaptive_random_search(&objective, &adaptive),
        Method::IsotropicEs => optimizers::run_isotropic_es(&objective, &adaptive),
    }?;
    let evaluations = objective.evaluations();
    let value = objective.evaluate(&outcome.estimate)?;
    write_out(out, format_args!("estimate {}\n", format_vector(&outcome.estimate)))?;
    write_out(out, format_args!("f {value}\n"))?;
    write_out(out, format_args!("evaluations {evaluations}\n"))?;
    if objective.known_minimizer().is_some() {
        if let Some(e) = outcome.trace.squared_errors.last() {
            write_out(out, format_args!("squared_error {e}\n"))?;
        }
    }
    if outcome.trace.degenerate_final() {
        write_out(
            out,
            format_args!("warning: all weights vanished; reported the best sample\n"),
        )?;
    }
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut spec = ExperimentSpec::from_file(&a.config)?;
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(dir) = &a.out_dir {
        let rebase = |p: &PathBuf| dir.join(p.file_name().unwrap_or(p.as_os_str()));
        spec.csv = rebase(&spec.csv);
        spec.svg = rebase(&spec.svg);
    }
    spec.validate()?;
    let report = run_experiment(&spec)?;
    emit_csv(&report, &spec.csv)?;
    emit_svg_plot(&report, &spec.svg)?;
    for m in &report.methods {
        if let Some(last) = m.rows.last() {
            write_out(
                out,
                format_args!(
                    "{} n={} mean_mse={} ci_half_width={}\n",
                    m.method, last.n_evals, last.mean_mse, last.ci_half_width
                ),
            )?;
        }
    }
    write_out(
        out,
        format_args!(
            "wrote {} and {} ({} trials, {:.1} s)\n",
            spec.csv.display(),
            spec.svg.display(),
            report.trials,
            report.wall_clock_secs
        ),
    )
}

fn oracle_cmd(a: OracleArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    if !(1..=2).contains(&a.d) {
        return Err(usage("the oracle supports d = 1 or d = 2"));
    }
    let objective = Objective::builtin(&a.function, a.d).map_err(|e| usage(e.to_string()))?;
    let (default_lo, default_hi) = if a.function == "quad-cubic" {
        QUAD_CUBIC_DOMAIN
    } else {
        (-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH)
    };
    let (lo, hi) = (a.lo.unwrap_or(default_lo), a.hi.unwrap_or(default_hi));
    let f = |x: &[f64]| objective.evaluate(x).unwrap_or(f64::NAN);
    let base = |alpha: f64| QuadratureSpec::new(vec![lo; a.d], vec![hi; a.d], a.points, alpha);

    if let Some(alpha) = a.alpha {
        let mean = oracle::gibbs_mean_refined(&f, &base(alpha)?, a.tolerance)?;
        let text = if mean.len() == 1 {
            mean[0].to_string()
        } else {
            format_vector(&mean)
        };
        return write_out(out, format_args!("{text}\n"));
    }
    let alphas = a.alphas.unwrap_or_default();
    if alphas.is_empty() {
        return Err(usage("--alphas needs at least one value"));
    }
    let minimizer = objective
        .known_minimizer()
        .ok_or_else(|| usage(format!("{} has no known minimizer", a.function)))?
        .to_vec();
    let spec = base(alphas[0])?;
    let gaps = oracle::laplace_gap(&f, &minimizer, &spec, &alphas)?;
    for (alpha, gap) in alphas.iter().zip(&gaps) {
        write_out(out, format_args!("alpha {alpha} gap {gap}\n"))?;
    }
    if alphas.len() >= 2 && gaps.iter().all(|g| *g > 0.0) {
        let xs: Vec<f64> = alphas.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = gaps.iter().map(|v| v.ln()).collect();
        let fit = stats::least_squares(&xs, &ys);
        write_out(out, format_args!("slope {} r2 {}\n", fit.slope, fit.r_squared))?;
    }
    Ok(())
}

fn slope(a: SlopeArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let rows = read_csv(&a.csv)?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.method == a.method.name() && r.n_evals >= a.from && r.n_evals <= a.to)
        .map(|r| (r.n_evals as f64, r.mean_mse))
        .collect();
    let fit = stats::fit_loglog(&points)?;
    write_out(
        out,
        format_args!(
            "slope {} intercept {} r2 {} points {}\n",
            fit.slope,
            fit.intercept,
            fit.r_squared,
            points.len()
        ),
    )
}
