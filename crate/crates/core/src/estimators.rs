//! Laplace importance weights and the self-normalized average.
//!
//! Weights are kept as logarithms `L_i = -alpha f(x_i) - log q(x_i)` and only
//! exponentiated after subtracting their maximum, so neither the temperature
//! nor the size of the objective values can overflow or underflow the sum.
//! Subtracting the maximum is also what makes the estimate blind to constant
//! shifts of the objective.

use thiserror::Error;

use crate::distributions::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("every log-weight is -inf")]
    Degenerate,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
}

/// `L_i = -alpha * values[i] - log_densities[i]`; a `+inf` value gives `-inf`.
pub fn laplace_log_weights(alpha: f64, values: &[f64], log_densities: &[f64]) -> Result<Vec<f64>, WeightError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(WeightError::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if values.len() != log_densities.len() {
        return Err(WeightError::LengthMismatch(format!(
            "{} values, {} log-densities",
            values.len(),
            log_densities.len()
        )));
    }
    Ok(values
        .iter()
        .zip(log_densities)
        .map(|(&f, &lq)| log_weight(alpha, f, lq))
        .collect())
}

#[inline]
pub(crate) fn log_weight(alpha: f64, value: f64, log_density: f64) -> f64 {
    if value == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        -alpha * value - log_density
    }
}

/// Softmax of the log-weights.
pub fn normalized_weights(log_weights: &[f64]) -> Result<Vec<f64>, WeightError> {
    let max = max_log_weight(log_weights)?;
    let mut p: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

fn max_log_weight(log_weights: &[f64]) -> Result<f64, WeightError> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        Err(WeightError::Degenerate)
    } else {
        Ok(max)
    }
}

/// `sum p_i x_i` over the rows of `points`.
pub fn self_normalized_average(points: &[Vec<f64>], log_weights: &[f64]) -> Result<Vec<f64>, WeightError> {
    if points.len() != log_weights.len() {
        return Err(WeightError::LengthMismatch(format!(
            "{} points, {} log-weights",
            points.len(),
            log_weights.len()
        )));
    }
    let d = points.first().map_or(0, Vec::len);
    weighted_mean_rows(points.iter().map(Vec::as_slice), log_weights, d)
}

pub(crate) fn weighted_mean_rows<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    log_weights: &[f64],
    d: usize,
) -> Result<Vec<f64>, WeightError> {
    let max = max_log_weight(log_weights)?;
    let mut acc = vec![0.0; d];
    let mut total = 0.0;
    for (row, &l) in rows.zip(log_weights) {
        let w = (l - max).exp();
        if w == 0.0 {
            continue;
        }
        total += w;
        for (a, x) in acc.iter_mut().zip(row) {
            *a += w * x;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(acc)
}

/// `1 / sum p_i^2`, between 1 and `n`.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64, WeightError> {
    let max = max_log_weight(log_weights)?;
    let (s1, s2) = log_weights.iter().fold((0.0, 0.0), |(s1, s2), l| {
        let w = (l - max).exp();
        (s1 + w, s2 + w * w)
    });
    Ok(s1 * s1 / s2)
}

/// The evaluated samples of one run with their cached values and
/// sampling log-densities. Rows are stored contiguously.
#[derive(Debug, Clone)]
pub struct WeightedEnsemble {
    dimension: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    log_densities: Vec<f64>,
    log_weights: Vec<f64>,
    alpha: Option<f64>,
    offset: f64,
}

impl WeightedEnsemble {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            points: Vec::new(),
            values: Vec::new(),
            log_densities: Vec::new(),
            log_weights: Vec::new(),
            alpha: None,
            offset: 0.0,
        }
    }

    pub fn with_capacity(dimension: usize, n: usize) -> Self {
        Self {
            dimension,
            points: Vec::with_capacity(n * dimension),
            values: Vec::with_capacity(n),
            log_densities: Vec::with_capacity(n),
            log_weights: Vec::with_capacity(n),
            alpha: None,
            offset: 0.0,
        }
    }

    pub fn push(&mut self, point: &[f64], value: f64, log_density: f64) {
        assert_eq!(point.len(), self.dimension);
        self.points.extend_from_slice(point);
        self.values.push(value);
        self.log_densities.push(log_density);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_densities(&self) -> &[f64] {
        &self.log_densities
    }

    /// Log-weights of the first `len()` samples as of the last [`reweight`](Self::reweight).
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Recomputes the log-weights of the first `count` samples at `alpha`.
    ///
    /// The stored log-weights are `-alpha (f_i - f_min) - log q_i`, which
    /// differ from [`laplace_log_weights`] by the constant `alpha f_min`
    /// (see [`value_offset`](Self::value_offset)). Subtracting `f_min` before
    /// multiplying is exact for nearby values, so a constant added to the
    /// objective only enters through the rounding of the values themselves.
    pub fn reweight(&mut self, alpha: f64, count: usize) -> Result<(), WeightError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(WeightError::InvalidParameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let count = count.min(self.len());
        let values = &self.values[..count];
        let offset = values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        let offset = if offset.is_finite() { offset } else { 0.0 };
        self.log_weights.clear();
        self.log_weights.extend(
            values
                .iter()
                .zip(&self.log_densities[..count])
                .map(|(&f, &lq)| log_weight(alpha, f - offset, lq)),
        );
        self.alpha = Some(alpha);
        self.offset = offset;
        Ok(())
    }

    /// The `f_min` subtracted by the last [`reweight`](Self::reweight).
    pub fn value_offset(&self) -> f64 {
        self.offset
    }

    /// Self-normalized average over the currently weighted prefix.
    pub fn weighted_mean(&self) -> Result<Vec<f64>, WeightError> {
        let rows = self.points.chunks_exact(self.dimension);
        weighted_mean_rows(rows, &self.log_weights, self.dimension)
    }

    pub fn effective_sample_size(&self) -> Result<f64, WeightError> {
        effective_sample_size(&self.log_weights)
    }

    /// Index of the smallest value among the first `count` samples; ties go
    /// to the lowest index.
    pub fn argmin(&self, count: usize) -> Option<usize> {
        argmin(&self.values[..count.min(self.len())])
    }
}

/// First index of the minimum.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Bootstrap standard error of the self-normalized average: resample
/// `(point, log-weight)` pairs with replacement and take the per-coordinate
/// standard deviation of the re-estimated averages.
pub fn bootstrap_standard_error(
    points: &[Vec<f64>],
    log_weights: &[f64],
    resamples: usize,
    rng: &mut SeededRng,
) -> Result<Vec<f64>, WeightError> {
    if resamples < 2 {
        return Err(WeightError::InvalidParameter("need at least two resamples".into()));
    }
    let n = points.len();
    let d = points.first().map_or(0, Vec::len);
    let mut estimates = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    let mut lw = vec![0.0; n];
    for _ in 0..resamples {
        for (slot, w) in idx.iter_mut().zip(lw.iter_mut()) {
            *slot = rng.index(n);
            *w = log_weights[*slot];
        }
        // an all-zero-weight resample carries no information; skip it
        match weighted_mean_rows(idx.iter().map(|&i| points[i].as_slice()), &lw, d) {
            Ok(est) => estimates.push(est),
            Err(WeightError::Degenerate) => {}
            Err(e) => return Err(e),
        }
    }
    if estimates.len() < 2 {
        return Err(WeightError::Degenerate);
    }
    let k = estimates.len() as f64;
    Ok((0..d)
        .map(|j| {
            let mean = estimates.iter().map(|e| e[j]).sum::<f64>() / k;
            let var = estimates.iter().map(|e| (e[j] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt()
        })
        .collect())
}
