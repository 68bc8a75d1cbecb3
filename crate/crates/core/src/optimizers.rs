//! The five drivers: static LISO, random search, adaptive LISO, adaptive
//! random search and the isotropic evolution strategy.
//!
//! Every driver spends exactly `budget` objective evaluations and records an
//! anytime estimate at each checkpoint. For the importance-sampling and
//! random-search drivers the estimate at checkpoint `c` is computed from the
//! first `c` evaluated samples (softmin average at temperature `alpha(c)`, or
//! the best sample). The evolution strategy has no such estimator; its
//! checkpoint estimate is the current search mean.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{IsotropicGaussian, MixturePolicy, SamplingPolicy, SeededRng};
use crate::estimators::{WeightError, WeightedEnsemble};
use crate::objectives::{Objective, ObjectiveError};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

fn invalid(msg: impl Into<String>) -> OptimizeError {
    OptimizeError::InvalidConfig(msg.into())
}

/// `alpha0 * n^(2 / (d + 2))`.
pub fn alpha_schedule(alpha0: f64, n: usize, d: usize) -> f64 {
    debug_assert!(alpha0 > 0.0 && n >= 1 && d >= 1);
    alpha0 * (n as f64).powf(2.0 / (d as f64 + 2.0))
}

/// How the inverse temperature is chosen at a given evaluation count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    /// [`alpha_schedule`] with this `alpha0`.
    Schedule(f64),
    Fixed(f64),
}

impl Temperature {
    pub fn at(&self, n: usize, d: usize) -> f64 {
        match *self {
            Self::Schedule(alpha0) => alpha_schedule(alpha0, n, d),
            Self::Fixed(alpha) => alpha,
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        let v = match *self {
            Self::Schedule(a) | Self::Fixed(a) => a,
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("temperature must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Liso,
    RandomSearch,
    AdaptiveLiso,
    AdaptiveRandomSearch,
    IsotropicEs,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Liso,
        Method::RandomSearch,
        Method::AdaptiveLiso,
        Method::AdaptiveRandomSearch,
        Method::IsotropicEs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Liso => "liso",
            Self::RandomSearch => "random_search",
            Self::AdaptiveLiso => "adaptive_liso",
            Self::AdaptiveRandomSearch => "adaptive_random_search",
            Self::IsotropicEs => "isotropic_es",
        }
    }

    pub fn is_adaptive(self) -> bool {
        !matches!(self, Self::Liso | Self::RandomSearch)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// Axis-aligned box used to project the adapted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OptimizeError> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("box bounds must have equal, nonzero length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(invalid("box is empty: some lower bound exceeds its upper bound"));
        }
        Ok(Self { lower, upper })
    }

    /// Same interval in every coordinate.
    pub fn cube(lower: f64, upper: f64, d: usize) -> Result<Self, OptimizeError> {
        Self::new(vec![lower; d], vec![upper; d])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    /// Euclidean projection, i.e. componentwise clamping.
    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// `count` geometrically spaced evaluation counts from `start` to `budget`,
/// rounded and deduplicated. Always ends at `budget`.
pub fn geometric_checkpoints(start: usize, budget: usize, count: usize) -> Vec<usize> {
    assert!(budget >= 1);
    let start = start.clamp(1, budget);
    let count = count.max(1);
    let mut grid: Vec<usize> = if count == 1 || start == budget {
        vec![budget]
    } else {
        let ratio = (budget as f64 / start as f64).ln();
        (0..count)
            .map(|i| {
                let t = i as f64 / (count - 1) as f64;
                ((start as f64) * (ratio * t).exp()).round() as usize
            })
            .collect()
    };
    grid.push(budget);
    grid.retain(|&c| c >= 1 && c <= budget);
    grid.sort_unstable();
    grid.dedup();
    grid
}

fn resolve_checkpoints(requested: Option<&[usize]>, budget: usize) -> Vec<usize> {
    match requested {
        None => geometric_checkpoints(100, budget, 30),
        Some(cs) => {
            let mut grid: Vec<usize> = cs.iter().copied().filter(|&c| c >= 1 && c <= budget).collect();
            grid.push(budget);
            grid.sort_unstable();
            grid.dedup();
            grid
        }
    }
}

#[derive(Debug, Clone)]
pub struct StaticConfig {
    pub budget: usize,
    pub temperature: Temperature,
    pub q0: SamplingPolicy,
    pub seed: u64,
    /// Selects an independent random stream under the same seed.
    pub stream: u64,
    /// `None` means [`geometric_checkpoints`]`(100, budget, 30)`.
    pub checkpoints: Option<Vec<usize>>,
}

impl StaticConfig {
    pub fn new(budget: usize, alpha0: f64, q0: impl Into<SamplingPolicy>, seed: u64) -> Self {
        Self {
            budget,
            temperature: Temperature::Schedule(alpha0),
            q0: q0.into(),
            seed,
            stream: 0,
            checkpoints: None,
        }
    }

    fn validate(&self, objective: &Objective) -> Result<(), OptimizeError> {
        if self.budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        self.temperature.validate()?;
        if self.q0.dimension() != objective.dimension() {
            return Err(invalid(format!(
                "q0 has dimension {}, objective has {}",
                self.q0.dimension(),
                objective.dimension()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub budget: usize,
    pub temperature: Temperature,
    pub q0: IsotropicGaussian,
    /// Weight of `q0` in the sampling mixture.
    pub mixture_weight: f64,
    /// Variance of the adapted Gaussian.
    pub sigma2: f64,
    pub batch_size: usize,
    pub projection_box: Option<BoxDomain>,
    /// Rescale the evolution-strategy recombination weights to sum to one.
    pub normalize_es_weights: bool,
    pub seed: u64,
    pub stream: u64,
    pub checkpoints: Option<Vec<usize>>,
}

impl AdaptiveConfig {
    /// Mixture weight 0, `sigma2 = 1/d`, batches of 300.
    pub fn new(budget: usize, alpha0: f64, q0: IsotropicGaussian, seed: u64) -> Self {
        let d = q0.dimension();
        Self {
            budget,
            temperature: Temperature::Schedule(alpha0),
            q0,
            mixture_weight: 0.0,
            sigma2: 1.0 / d as f64,
            batch_size: 300,
            projection_box: None,
            normalize_es_weights: true,
            seed,
            stream: 0,
            checkpoints: None,
        }
    }

    /// The static configuration drawing from the same `q0` and stream.
    pub fn as_static(&self) -> StaticConfig {
        StaticConfig {
            budget: self.budget,
            temperature: self.temperature,
            q0: self.q0.clone().into(),
            seed: self.seed,
            stream: self.stream,
            checkpoints: self.checkpoints.clone(),
        }
    }

    fn validate(&self, objective: &Objective) -> Result<(), OptimizeError> {
        if self.budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        self.temperature.validate()?;
        if !(0.0..=1.0).contains(&self.mixture_weight) {
            return Err(invalid(format!(
                "mixture weight {} outside [0, 1]",
                self.mixture_weight
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if self.q0.dimension() != objective.dimension() {
            return Err(invalid(format!(
                "q0 has dimension {}, objective has {}",
                self.q0.dimension(),
                objective.dimension()
            )));
        }
        if let Some(b) = &self.projection_box {
            if b.dimension() != objective.dimension() {
                return Err(invalid("projection box dimension differs from the objective"));
            }
        }
        Ok(())
    }

    fn policy(&self, iteration: usize, mean: &[f64]) -> SamplingPolicy {
        if iteration == 1 {
            return self.q0.clone().into();
        }
        let adapted = IsotropicGaussian::new(mean.to_vec(), self.sigma2);
        MixturePolicy::new(self.mixture_weight, adapted, self.q0.clone()).into()
    }
}

/// Anytime estimates of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub checkpoints: Vec<usize>,
    pub estimates: Vec<Vec<f64>>,
    /// `|x - x*|^2` per checkpoint; empty when the minimizer is unknown.
    pub squared_errors: Vec<f64>,
    /// Effective sample size of the weights, for weighted estimators.
    pub ess: Vec<Option<f64>>,
    /// Set where every weight vanished and the best sample was used instead.
    pub fallbacks: Vec<bool>,
}

impl RunTrace {
    fn record(&mut self, count: usize, estimate: &[f64], minimizer: Option<&[f64]>, ess: Option<f64>, fallback: bool) {
        debug_assert!(self.checkpoints.last().is_none_or(|&c| c < count));
        self.checkpoints.push(count);
        self.estimates.push(estimate.to_vec());
        if let Some(xs) = minimizer {
            self.squared_errors
                .push(estimate.iter().zip(xs).map(|(a, b)| (a - b) * (a - b)).sum());
        }
        self.ess.push(ess);
        self.fallbacks.push(fallback);
    }

    /// Whether the final estimate came from the argmin fallback.
    pub fn degenerate_final(&self) -> bool {
        self.fallbacks.last().copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub estimate: Vec<f64>,
    pub trace: RunTrace,
}

struct Estimate {
    point: Vec<f64>,
    ess: Option<f64>,
    fallback: bool,
}

/// Softmin average of the first `count` samples at `alpha`; the best sample
/// if every weight vanished.
fn softmin_estimate(
    ens: &mut WeightedEnsemble,
    count: usize,
    alpha: f64,
    projection: Option<&BoxDomain>,
) -> Result<Estimate, OptimizeError> {
    ens.reweight(alpha, count)?;
    let mut est = match ens.weighted_mean() {
        Ok(point) => Estimate {
            point,
            ess: ens.effective_sample_size().ok(),
            fallback: false,
        },
        Err(WeightError::Degenerate) => Estimate {
            point: best_sample(ens, count),
            ess: None,
            fallback: true,
        },
        Err(e) => return Err(e.into()),
    };
    if let Some(b) = projection {
        b.project(&mut est.point);
    }
    Ok(est)
}

fn best_sample(ens: &WeightedEnsemble, count: usize) -> Vec<f64> {
    let i = ens.argmin(count).expect("nonempty ensemble");
    ens.point(i).to_vec()
}

#[derive(Clone, Copy)]
enum StaticRule {
    Softmin,
    Best,
}

fn run_static(objective: &Objective, config: &StaticConfig, rule: StaticRule) -> Result<RunOutcome, OptimizeError> {
    config.validate(objective)?;
    let d = objective.dimension();
    let n = config.budget;
    let checkpoints = resolve_checkpoints(config.checkpoints.as_deref(), n);
    let minimizer = objective.known_minimizer();
    let mut rng = SeededRng::new(config.seed, config.stream);
    let mut ens = WeightedEnsemble::with_capacity(d, n);
    let mut trace = RunTrace::default();
    let mut x = vec![0.0; d];
    let mut next = 0;
    let mut last = None;
    for count in 1..=n {
        config.q0.sample_into(&mut rng, &mut x);
        let value = objective.evaluate(&x)?;
        ens.push(&x, value, config.q0.log_density(&x));
        if checkpoints[next] != count {
            continue;
        }
        next += 1;
        let est = match rule {
            StaticRule::Softmin => softmin_estimate(&mut ens, count, config.temperature.at(count, d), None)?,
            StaticRule::Best => Estimate {
                point: best_sample(&ens, count),
                ess: None,
                fallback: false,
            },
        };
        trace.record(count, &est.point, minimizer, est.ess, est.fallback);
        last = Some(est.point);
    }
    Ok(RunOutcome {
        estimate: last.expect("budget is always a checkpoint"),
        trace,
    })
}

/// Samples `budget` points from `q0` and returns their softmin average at
/// temperature `alpha(budget)`.
pub fn run_liso(objective: &Objective, config: &StaticConfig) -> Result<RunOutcome, OptimizeError> {
    run_static(objective, config, StaticRule::Softmin)
}

/// Same samples as [`run_liso`]; returns the best one (first on ties).
pub fn run_random_search(objective: &Objective, config: &StaticConfig) -> Result<RunOutcome, OptimizeError> {
    run_static(objective, config, StaticRule::Best)
}

#[derive(Clone, Copy)]
enum AdaptiveRule {
    Softmin,
    Best,
}

fn run_adaptive(
    objective: &Objective,
    config: &AdaptiveConfig,
    rule: AdaptiveRule,
) -> Result<RunOutcome, OptimizeError> {
    config.validate(objective)?;
    let d = objective.dimension();
    let n = config.budget;
    let checkpoints = resolve_checkpoints(config.checkpoints.as_deref(), n);
    let minimizer = objective.known_minimizer();
    let projection = config.projection_box.as_ref();
    let mut rng = SeededRng::new(config.seed, config.stream);
    let mut ens = WeightedEnsemble::with_capacity(d, n);
    let mut trace = RunTrace::default();
    let mut mean = config.q0.mean().to_vec();
    let mut x = vec![0.0; d];
    let mut next = 0;
    let mut count = 0;

    let estimate = |ens: &mut WeightedEnsemble, count: usize| -> Result<Estimate, OptimizeError> {
        match rule {
            AdaptiveRule::Softmin => softmin_estimate(ens, count, config.temperature.at(count, d), projection),
            AdaptiveRule::Best => Ok(Estimate {
                point: best_sample(ens, count),
                ess: None,
                fallback: false,
            }),
        }
    };

    let mut iteration = 0;
    while count < n {
        iteration += 1;
        let policy = config.policy(iteration, &mean);
        let batch_end = (count + config.batch_size).min(n);
        while count < batch_end {
            policy.sample_into(&mut rng, &mut x);
            let value = objective.evaluate(&x)?;
            ens.push(&x, value, policy.log_density(&x));
            count += 1;
            if count < batch_end && checkpoints[next] == count {
                let est = estimate(&mut ens, count)?;
                trace.record(count, &est.point, minimizer, est.ess, est.fallback);
                next += 1;
            }
        }
        let est = estimate(&mut ens, count)?;
        if checkpoints[next] == count {
            trace.record(count, &est.point, minimizer, est.ess, est.fallback);
            next += 1;
        }
        mean = est.point;
    }
    Ok(RunOutcome { estimate: mean, trace })
}

/// Batched adaptive LISO. Each batch is drawn from
/// `(1 - w) N(mu, sigma2 I) + w q0` (from `q0` for the first batch), every
/// sample keeps the log-density of the policy that produced it, and after
/// each batch `mu` becomes the softmin average of all samples so far at
/// `alpha(total evaluations)`, projected onto the box if one is set.
/// `batch_size = 1` is the one-sample-per-iteration form.
pub fn run_adaptive_liso(objective: &Objective, config: &AdaptiveConfig) -> Result<RunOutcome, OptimizeError> {
    run_adaptive(objective, config, AdaptiveRule::Softmin)
}

/// As [`run_adaptive_liso`] with `mu` set to the best sample so far.
pub fn run_adaptive_random_search(objective: &Objective, config: &AdaptiveConfig) -> Result<RunOutcome, OptimizeError> {
    run_adaptive(objective, config, AdaptiveRule::Best)
}

/// Parent count `floor(B/2)` and weights `log((B+1)/2) - log(i)` for
/// `i = 1..=floor(B/2)`.
pub fn isotropic_es_recombination_weights(batch_size: usize) -> Result<(usize, Vec<f64>), OptimizeError> {
    if batch_size < 2 {
        return Err(invalid(format!(
            "recombination needs a batch of at least 2, got {batch_size}"
        )));
    }
    let parents = batch_size / 2;
    let top = ((batch_size as f64 + 1.0) / 2.0).ln();
    Ok((parents, (1..=parents).map(|i| top - (i as f64).ln()).collect()))
}

/// Weighted sum of the best `weights.len()` rows, ranked by `values`
/// ascending. The sort is stable, so ties keep their sampling order.
pub fn es_recombine(points: &[Vec<f64>], values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(points.len(), values.len());
    assert!(weights.len() <= points.len());
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let d = points.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; d];
    for (&i, w) in order.iter().zip(weights) {
        for (m, x) in mean.iter_mut().zip(&points[i]) {
            *m += w * x;
        }
    }
    mean
}

/// Batched isotropic evolution strategy without covariance adaptation. Each
/// batch is drawn from `N(mu, sigma2 I)` (from `q0` first) and `mu` becomes
/// the rank-weighted mean of the best half of that batch alone. A trailing
/// batch of a single point is evaluated but leaves `mu` unchanged.
pub fn run_isotropic_es(objective: &Objective, config: &AdaptiveConfig) -> Result<RunOutcome, OptimizeError> {
    config.validate(objective)?;
    if config.batch_size < 2 {
        return Err(invalid("isotropic ES needs a batch size of at least 2"));
    }
    let d = objective.dimension();
    let n = config.budget;
    let checkpoints = resolve_checkpoints(config.checkpoints.as_deref(), n);
    let minimizer = objective.known_minimizer();
    let mut rng = SeededRng::new(config.seed, config.stream);
    let mut trace = RunTrace::default();
    let mut mean = config.q0.mean().to_vec();
    let mut next = 0;
    let mut count = 0;
    let mut iteration = 0;
    let mut batch: Vec<Vec<f64>> = Vec::with_capacity(config.batch_size);
    let mut values: Vec<f64> = Vec::with_capacity(config.batch_size);

    while count < n {
        iteration += 1;
        let policy: SamplingPolicy = if iteration == 1 {
            config.q0.clone().into()
        } else {
            IsotropicGaussian::new(mean.clone(), config.sigma2).into()
        };
        let batch_end = (count + config.batch_size).min(n);
        batch.clear();
        values.clear();
        while count < batch_end {
            let mut x = vec![0.0; d];
            policy.sample_into(&mut rng, &mut x);
            values.push(objective.evaluate(&x)?);
            batch.push(x);
            count += 1;
            if count < batch_end && checkpoints[next] == count {
                trace.record(count, &mean, minimizer, None, false);
                next += 1;
            }
        }
        if batch.len() >= 2 {
            let (_, mut weights) = isotropic_es_recombination_weights(batch.len())?;
            if config.normalize_es_weights {
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
            }
            mean = es_recombine(&batch, &values, &weights);
        }
        if checkpoints[next] == count {
            trace.record(count, &mean, minimizer, None, false);
            next += 1;
        }
    }
    Ok(RunOutcome { estimate: mean, trace })
}
