//! Objective functions: the three benchmark landscapes, closure-backed
//! objectives, and an objective served by an external process.
//!
//! Every evaluation goes through [`Objective::evaluate`], which checks the
//! input dimension, counts the call and validates the returned value. NaN
//! and `-inf` are rejected; `+inf` is passed through as the zero-weight
//! sentinel so that infinite penalties can encode a constrained domain.

use std::f64::consts::{E, PI};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("objective returned a non-admissible value {value} at {point:?}")]
    NonFinite { value: f64, point: Vec<f64> },
    #[error("external objective failed: {message} (raw response: {raw:?})")]
    External { message: String, raw: String },
}

/// The raw evaluation behind an [`Objective`].
pub trait Evaluator: Send + Sync {
    fn eval(&self, x: &[f64]) -> Result<f64, ObjectiveError>;
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> Result<f64, ObjectiveError> + Send + Sync,
{
    fn eval(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        self(x)
    }
}

/// A scalar function of a `d`-vector with an evaluation counter.
pub struct Objective {
    name: String,
    dimension: usize,
    evaluator: Box<dyn Evaluator>,
    known_minimizer: Option<Vec<f64>>,
    evals: AtomicU64,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("known_minimizer", &self.known_minimizer)
            .field("evaluations", &self.evaluations())
            .finish()
    }
}

impl Objective {
    pub fn new(name: impl Into<String>, dimension: usize, evaluator: impl Evaluator + 'static) -> Self {
        assert!(dimension >= 1, "objective dimension must be positive");
        Self {
            name: name.into(),
            dimension,
            evaluator: Box::new(evaluator),
            known_minimizer: None,
            evals: AtomicU64::new(0),
        }
    }

    /// Wraps an infallible closure.
    pub fn from_fn<F>(name: impl Into<String>, dimension: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, dimension, move |x: &[f64]| Ok(f(x)))
    }

    pub fn with_minimizer(mut self, minimizer: Vec<f64>) -> Self {
        assert_eq!(minimizer.len(), self.dimension, "minimizer dimension");
        self.known_minimizer = Some(minimizer);
        self
    }

    pub fn sphere(dimension: usize) -> Self {
        Self::new("sphere", dimension, sphere).with_minimizer(vec![0.0; dimension])
    }

    pub fn rastrigin(dimension: usize) -> Self {
        Self::new("rastrigin", dimension, rastrigin).with_minimizer(vec![0.0; dimension])
    }

    pub fn ackley(dimension: usize) -> Self {
        Self::new("ackley", dimension, ackley).with_minimizer(vec![0.0; dimension])
    }

    /// One-dimensional `x^2 + 0.2 x^3` restricted to [`QUAD_CUBIC_DOMAIN`];
    /// outside the domain it returns `+inf`.
    pub fn quad_cubic() -> Self {
        Self::new("quad-cubic", 1, quad_cubic).with_minimizer(vec![0.0])
    }

    /// Looks up a built-in objective by name.
    pub fn builtin(name: &str, dimension: usize) -> Result<Self, ObjectiveError> {
        match name {
            "sphere" => Ok(Self::sphere(dimension)),
            "rastrigin" => Ok(Self::rastrigin(dimension)),
            "ackley" => Ok(Self::ackley(dimension)),
            "quad-cubic" if dimension == 1 => Ok(Self::quad_cubic()),
            "quad-cubic" => Err(ObjectiveError::InvalidInput(format!(
                "quad-cubic is one-dimensional, got d={dimension}"
            ))),
            other => Err(ObjectiveError::InvalidInput(format!("unknown objective {other:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn known_minimizer(&self) -> Option<&[f64]> {
        self.known_minimizer.as_deref()
    }

    /// Number of evaluator calls so far.
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        if x.len() != self.dimension {
            return Err(ObjectiveError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        let value = self.evaluator.eval(x)?;
        if value.is_nan() || value == f64::NEG_INFINITY {
            return Err(ObjectiveError::NonFinite {
                value,
                point: x.to_vec(),
            });
        }
        Ok(value)
    }
}

fn check_finite(x: &[f64]) -> Result<(), ObjectiveError> {
    if x.is_empty() {
        return Err(ObjectiveError::InvalidInput("empty input vector".into()));
    }
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(ObjectiveError::InvalidInput(format!(
            "component {i} is not finite ({})",
            x[i]
        ))),
        None => Ok(()),
    }
}

/// `sum x_i^2`.
pub fn sphere(x: &[f64]) -> Result<f64, ObjectiveError> {
    check_finite(x)?;
    Ok(x.iter().map(|v| v * v).sum())
}

/// `10 d + sum [4 x_i^2 - 10 cos(pi x_i)]`.
///
/// Note the coefficients: this is not the textbook Rastrigin
/// (`x_i^2 - 10 cos(2 pi x_i)`). The local curvature at the origin and the
/// spacing of the local minima differ, and the experiment configurations
/// (`alpha0 = d / 80`) are tuned for this form.
pub fn rastrigin(x: &[f64]) -> Result<f64, ObjectiveError> {
    check_finite(x)?;
    let d = x.len() as f64;
    let s: f64 = x.iter().map(|v| 4.0 * v * v - 10.0 * (PI * v).cos()).sum();
    Ok(10.0 * d + s)
}

/// Ackley with the usual constants `20`, `0.2`, `2 pi`.
pub fn ackley(x: &[f64]) -> Result<f64, ObjectiveError> {
    check_finite(x)?;
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    // same sum as -20 a - b + 20 + e, grouped so the origin gives exactly 0
    Ok(20.0 * (1.0 - (-0.2 * sq.sqrt()).exp()) + (E - cs.exp()))
}

/// Domain on which [`quad_cubic`] is finite. The cubic term makes the
/// function unbounded below for `x < -5`; the interval keeps the origin the
/// unique minimizer.
pub const QUAD_CUBIC_DOMAIN: (f64, f64) = (-3.0, 3.0);

/// `x^2 + 0.2 x^3` on [`QUAD_CUBIC_DOMAIN`], `+inf` outside.
pub fn quad_cubic(x: &[f64]) -> Result<f64, ObjectiveError> {
    check_finite(x)?;
    if x.len() != 1 {
        return Err(ObjectiveError::DimensionMismatch {
            expected: 1,
            got: x.len(),
        });
    }
    let t = x[0];
    if t < QUAD_CUBIC_DOMAIN.0 || t > QUAD_CUBIC_DOMAIN.1 {
        return Ok(f64::INFINITY);
    }
    Ok(t * t + 0.2 * t * t * t)
}

/// Program and arguments for an external objective process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Splits a command line on whitespace. No quoting rules.
    pub fn parse(line: &str) -> Result<Self, ObjectiveError> {
        let mut parts = line.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| ObjectiveError::InvalidInput("empty external command".into()))?;
        Ok(Self::new(program, parts))
    }
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Speaks the line protocol with a child process: one line of
/// space-separated coordinates in, one number out.
pub struct ExternalEvaluator {
    command: ExternalCommand,
    io: Mutex<ChildIo>,
}

impl ExternalEvaluator {
    pub fn spawn(command: ExternalCommand) -> Result<Self, ObjectiveError> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ObjectiveError::External {
                message: format!("failed to spawn {:?}: {e}", command.program),
                raw: String::new(),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            command,
            io: Mutex::new(ChildIo { child, stdin, stdout }),
        })
    }

    pub fn command(&self) -> &ExternalCommand {
        &self.command
    }
}

/// Formats a request line. `f64`'s `Display` is the shortest decimal that
/// parses back to the same value.
pub fn format_request(x: &[f64]) -> String {
    let mut line = x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    line.push('\n');
    line
}

/// Parses a response line into a value; rejects anything but a finite number.
pub fn parse_response(raw: &str) -> Result<f64, ObjectiveError> {
    let value: f64 = raw.trim().parse().map_err(|_| ObjectiveError::External {
        message: "malformed response".into(),
        raw: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(ObjectiveError::External {
            message: "non-finite response".into(),
            raw: raw.to_string(),
        });
    }
    Ok(value)
}

impl Evaluator for ExternalEvaluator {
    fn eval(&self, x: &[f64]) -> Result<f64, ObjectiveError> {
        check_finite(x)?;
        let mut io = self.io.lock().unwrap_or_else(|p| p.into_inner());
        let request = format_request(x);
        io.stdin
            .write_all(request.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| ObjectiveError::External {
                message: format!("write to child failed: {e}"),
                raw: String::new(),
            })?;
        let mut raw = String::new();
        let read = io.stdout.read_line(&mut raw).map_err(|e| ObjectiveError::External {
            message: format!("read from child failed: {e}"),
            raw: raw.clone(),
        })?;
        if read == 0 {
            let status = io.child.try_wait().ok().flatten();
            return Err(ObjectiveError::External {
                message: match status {
                    Some(s) => format!("child exited ({s})"),
                    None => "child closed its output".into(),
                },
                raw,
            });
        }
        parse_response(&raw)
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        let io = self.io.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = io.child.kill();
        let _ = io.child.wait();
    }
}

/// Builds an [`Objective`] backed by a freshly spawned child process.
pub fn external_objective(command: ExternalCommand, dimension: usize) -> Result<Objective, ObjectiveError> {
    let name = format!("external:{}", command.program);
    let evaluator = ExternalEvaluator::spawn(command)?;
    Ok(Objective::new(name, dimension, evaluator))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_values() {
        assert_eq!(sphere(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(sphere(&[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(sphere(&[1.0; 4]).unwrap(), 4.0);
    }

    #[test]
    fn rastrigin_values() {
        assert_eq!(rastrigin(&[0.0; 4]).unwrap(), 0.0);
        assert!((rastrigin(&[1.0, 0.0]).unwrap() - 24.0).abs() < 1e-12);
        assert!((rastrigin(&[0.5]).unwrap() - 11.0).abs() < 1e-12);
    }

    #[test]
    fn ackley_values() {
        assert_eq!(ackley(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(ackley(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(ackley(&[0.0]).unwrap(), 0.0);
        let expected = -20.0 * (-0.1f64).exp() - (-1.0f64).exp() + 20.0 + E;
        assert!((ackley(&[0.5]).unwrap() - expected).abs() < 1e-12);
        assert!((ackley(&[0.5]).unwrap() - 4.253_654_026_568_412).abs() < 1e-12);
    }

    #[test]
    fn benchmarks_reject_non_finite() {
        for f in [sphere, rastrigin, ackley] {
            assert!(matches!(f(&[1.0, f64::NAN]), Err(ObjectiveError::InvalidInput(_))));
            assert!(matches!(f(&[f64::INFINITY]), Err(ObjectiveError::InvalidInput(_))));
        }
    }

    #[test]
    fn benchmarks_positive_away_from_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let d = rng.random_range(1..=12);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!(sphere(&x).unwrap() > 0.0);
            assert!(ackley(&x).unwrap() > 0.0);
            assert!(rastrigin(&x).unwrap() > 0.0);
            assert_eq!(rastrigin(&x).unwrap().to_bits(), rastrigin(&x).unwrap().to_bits());
        }
    }

    #[test]
    fn counter_counts_every_call() {
        let obj = Objective::sphere(3);
        for k in 1..=17 {
            obj.evaluate(&[1.0, 2.0, 3.0]).unwrap();
            assert_eq!(obj.evaluations(), k);
        }
        assert!(obj.evaluate(&[1.0]).is_err());
        assert_eq!(obj.evaluations(), 17);
    }

    #[test]
    fn nan_rejected_infinity_passes() {
        let obj = Objective::from_fn("nan", 1, |_| f64::NAN);
        assert!(matches!(obj.evaluate(&[0.0]), Err(ObjectiveError::NonFinite { .. })));
        let obj = Objective::from_fn("neg", 1, |_| f64::NEG_INFINITY);
        assert!(obj.evaluate(&[0.0]).is_err());
        let obj = Objective::from_fn("wall", 1, |_| f64::INFINITY);
        assert_eq!(obj.evaluate(&[0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn quad_cubic_domain() {
        assert_eq!(quad_cubic(&[0.0]).unwrap(), 0.0);
        assert!((quad_cubic(&[1.0]).unwrap() - 1.2).abs() < 1e-15);
        assert_eq!(quad_cubic(&[-3.5]).unwrap(), f64::INFINITY);
        assert!(Objective::builtin("quad-cubic", 2).is_err());
        assert!(Objective::builtin("nope", 2).is_err());
    }

    #[test]
    fn request_round_trips() {
        let x = [0.1, -1e-300, 123456789.125, 1.0 / 3.0];
        let line = format_request(&x);
        assert!(line.ends_with('\n'));
        let back: Vec<f64> = line.split(' ').map(|s| s.trim().parse().unwrap()).collect();
        assert_eq!(back, x);
        assert!(parse_response("nan\n").is_err());
        assert!(parse_response("inf\n").is_err());
        assert!(parse_response("abc").is_err());
        assert_eq!(parse_response(" 2.5 \n").unwrap(), 2.5);
    }
}
