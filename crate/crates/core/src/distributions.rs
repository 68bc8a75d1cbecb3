//! Sampling policies and the seeded random source.
//!
//! Random numbers come from ChaCha8 (`rand_chacha`), whose output is
//! specified independently of platform and word size. A run is identified by
//! a `(seed, stream)` pair: the seed keys the generator and the stream selects
//! one of 2^64 independent ChaCha streams, so trial `t` of an experiment uses
//! stream `t` and can be replayed on its own.
//!
//! Standard normals are drawn with `rand_distr::StandardNormal` (the
//! ziggurat method). Together with ChaCha8 this fixes every sampled bit.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

/// `N(mean, variance * I_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotropicGaussian {
    mean: Vec<f64>,
    variance: f64,
}

impl IsotropicGaussian {
    /// Panics unless `variance > 0` and the mean is finite and nonempty.
    pub fn new(mean: Vec<f64>, variance: f64) -> Self {
        assert!(!mean.is_empty(), "gaussian needs at least one dimension");
        assert!(
            variance > 0.0 && variance.is_finite(),
            "variance must be positive, got {variance}"
        );
        assert!(mean.iter().all(|m| m.is_finite()), "mean must be finite");
        Self { mean, variance }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn with_mean(&self, mean: Vec<f64>) -> Self {
        Self::new(mean, self.variance)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        gaussian_log_density(self, x)
    }

    pub fn sample_into(&self, rng: &mut SeededRng, out: &mut [f64]) {
        let sd = self.variance.sqrt();
        for (o, m) in out.iter_mut().zip(&self.mean) {
            *o = m + sd * rng.standard_normal();
        }
    }
}

/// `-(d/2) log(2 pi s^2) - |x - mu|^2 / (2 s^2)`.
pub fn gaussian_log_density(g: &IsotropicGaussian, x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), g.mean.len());
    let d = g.mean.len() as f64;
    let sq: f64 = x.iter().zip(&g.mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * d * (2.0 * PI * g.variance).ln() - sq / (2.0 * g.variance)
}

/// `(1 - weight) * adapted + weight * envelope`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePolicy {
    weight: f64,
    adapted: IsotropicGaussian,
    envelope: IsotropicGaussian,
}

impl MixturePolicy {
    pub fn new(weight: f64, adapted: IsotropicGaussian, envelope: IsotropicGaussian) -> Self {
        assert!(
            (0.0..=1.0).contains(&weight),
            "mixture weight must lie in [0, 1], got {weight}"
        );
        assert_eq!(
            adapted.dimension(),
            envelope.dimension(),
            "mixture components differ in dimension"
        );
        Self {
            weight,
            adapted,
            envelope,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn adapted(&self) -> &IsotropicGaussian {
        &self.adapted
    }

    pub fn envelope(&self) -> &IsotropicGaussian {
        &self.envelope
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        mixture_log_density(self, x)
    }

    /// A uniform draw picks the component, except at weights 0 and 1 where
    /// the component is fixed and no uniform is consumed.
    pub fn sample_into(&self, rng: &mut SeededRng, out: &mut [f64]) {
        let use_envelope = if self.weight == 0.0 {
            false
        } else if self.weight == 1.0 {
            true
        } else {
            rng.uniform() < self.weight
        };
        if use_envelope {
            self.envelope.sample_into(rng, out)
        } else {
            self.adapted.sample_into(rng, out)
        }
    }
}

/// `log((1 - w) e^a + w e^b)` with the max factored out.
pub fn mixture_log_density(m: &MixturePolicy, x: &[f64]) -> f64 {
    if m.weight == 0.0 {
        return m.adapted.log_density(x);
    }
    if m.weight == 1.0 {
        return m.envelope.log_density(x);
    }
    let a = (1.0 - m.weight).ln() + m.adapted.log_density(x);
    let b = m.weight.ln() + m.envelope.log_density(x);
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPolicy {
    Gaussian(IsotropicGaussian),
    Mixture(MixturePolicy),
}

impl SamplingPolicy {
    pub fn dimension(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.dimension(),
            Self::Mixture(m) => m.adapted.dimension(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian(g) => g.log_density(x),
            Self::Mixture(m) => m.log_density(x),
        }
    }

    pub fn sample_into(&self, rng: &mut SeededRng, out: &mut [f64]) {
        match self {
            Self::Gaussian(g) => g.sample_into(rng, out),
            Self::Mixture(m) => m.sample_into(rng, out),
        }
    }

    /// `count` draws as rows of a vector.
    pub fn sample(&self, rng: &mut SeededRng, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let mut x = vec![0.0; self.dimension()];
                self.sample_into(rng, &mut x);
                x
            })
            .collect()
    }
}

impl From<IsotropicGaussian> for SamplingPolicy {
    fn from(g: IsotropicGaussian) -> Self {
        Self::Gaussian(g)
    }
}

impl From<MixturePolicy> for SamplingPolicy {
    fn from(m: MixturePolicy) -> Self {
        Self::Mixture(m)
    }
}
