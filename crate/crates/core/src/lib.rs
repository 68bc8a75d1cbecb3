//! Gradient-free global optimization by Laplace importance sampling.
//!
//! Samples are drawn from a proposal `q`, weighted by `exp(-alpha f(x)) / q(x)`
//! and averaged; as the inverse temperature `alpha` grows the average
//! concentrates on the minimizer of `f`. The crate provides the static and
//! adaptive samplers, random-search and evolution-strategy baselines, a
//! quadrature oracle for the Gibbs measure, and a multi-trial benchmark
//! harness with CSV and SVG output.

pub mod distributions;
pub mod estimators;
pub mod harness;
pub mod objectives;
pub mod optimizers;
pub mod oracle;

pub use distributions::{IsotropicGaussian, MixturePolicy, SamplingPolicy, SeededRng};
pub use estimators::{effective_sample_size, laplace_log_weights, self_normalized_average, WeightedEnsemble};
pub use objectives::Objective;
pub use optimizers::{
    alpha_schedule, run_adaptive_liso, run_adaptive_random_search, run_isotropic_es, run_liso, run_random_search,
    AdaptiveConfig, Method, RunOutcome, RunTrace, StaticConfig, Temperature,
};
