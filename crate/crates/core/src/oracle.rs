//! Brute-force Gibbs-measure quantities by composite Simpson quadrature on a
//! tensor grid, for objectives of one or two variables.
//!
//! The integrand `exp(-alpha f)` is evaluated as `exp(-alpha (f - f_min))`
//! with `f_min` the smallest value on the grid, so the largest integrand
//! value is exactly 1 and the shift cancels from every ratio.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(String),
    #[error("integrand is not finite at {point:?} (f = {value})")]
    NonFinite { point: Vec<f64>, value: f64 },
    #[error("normalizer vanished after shifting; enlarge the box")]
    Underflow,
    #[error("grid refinement changed the result by {change:e} (> {tolerance:e})")]
    NotConverged { change: f64, tolerance: f64 },
}

/// Default half-width of the integration box.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;
/// Default grid points per dimension.
pub const DEFAULT_POINTS: usize = 1601;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Odd, at least 3.
    pub points: usize,
    pub alpha: f64,
}

impl QuadratureSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, points: usize, alpha: f64) -> Result<Self, OracleError> {
        let spec = Self {
            lower,
            upper,
            points,
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `[-8, 8]^d` with 1601 points per axis.
    pub fn default_box(d: usize, alpha: f64) -> Result<Self, OracleError> {
        Self::new(
            vec![-DEFAULT_HALF_WIDTH; d],
            vec![DEFAULT_HALF_WIDTH; d],
            DEFAULT_POINTS,
            alpha,
        )
    }

    pub fn interval(lo: f64, hi: f64, points: usize, alpha: f64) -> Result<Self, OracleError> {
        Self::new(vec![lo], vec![hi], points, alpha)
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self, OracleError> {
        Self::new(self.lower.clone(), self.upper.clone(), self.points, alpha)
    }

    /// Same box with `2m - 1` points, i.e. every interval halved.
    pub fn refined(&self) -> Self {
        Self {
            points: 2 * self.points - 1,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        let d = self.lower.len();
        if d == 0 || d > 2 || self.upper.len() != d {
            return Err(OracleError::InvalidSpec(format!(
                "box must have 1 or 2 dimensions, got lower={:?} upper={:?}",
                self.lower, self.upper
            )));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l < u && l.is_finite() && u.is_finite()))
        {
            return Err(OracleError::InvalidSpec("box is empty or unbounded".into()));
        }
        if self.points < 3 || self.points.is_multiple_of(2) {
            return Err(OracleError::InvalidSpec(format!(
                "grid needs an odd number of points >= 3, got {}",
                self.points
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(OracleError::InvalidSpec(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    fn axis(&self, j: usize) -> Vec<(f64, f64)> {
        let m = self.points;
        let (a, b) = (self.lower[j], self.upper[j]);
        let h = (b - a) / (m - 1) as f64;
        (0..m)
            .map(|i| {
                let w = if i == 0 || i == m - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let x = if i == m - 1 { b } else { a + i as f64 * h };
                (x, w * h / 3.0)
            })
            .collect()
    }
}

/// Grid nodes with their tensor Simpson weights and objective values.
struct Grid {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    values: Vec<f64>,
    min_value: f64,
}

fn build_grid<F>(f: &F, spec: &QuadratureSpec) -> Result<Grid, OracleError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    spec.validate()?;
    let axes: Vec<Vec<(f64, f64)>> = (0..spec.dimension()).map(|j| spec.axis(j)).collect();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match axes.as_slice() {
        [ax] => {
            for &(x, w) in ax {
                nodes.push(vec![x]);
                weights.push(w);
            }
        }
        [ax, ay] => {
            for &(x, wx) in ax {
                for &(y, wy) in ay {
                    nodes.push(vec![x, y]);
                    weights.push(wx * wy);
                }
            }
        }
        _ => unreachable!("validated dimension"),
    }
    let mut values = Vec::with_capacity(nodes.len());
    let mut min_value = f64::INFINITY;
    for node in &nodes {
        let v = f(node);
        if !v.is_finite() {
            return Err(OracleError::NonFinite {
                point: node.clone(),
                value: v,
            });
        }
        min_value = min_value.min(v);
        values.push(v);
    }
    Ok(Grid {
        nodes,
        weights,
        values,
        min_value,
    })
}

/// Integral of `exp(-alpha (f - shift))` over the box, with the shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsNormalizer {
    pub shifted_integral: f64,
    /// Smallest objective value on the grid.
    pub shift: f64,
}

impl GibbsNormalizer {
    /// `log Z_alpha` of the unshifted integrand.
    pub fn log_normalizer(&self, alpha: f64) -> f64 {
        self.shifted_integral.ln() - alpha * self.shift
    }
}

pub fn gibbs_normalizer<F>(f: &F, spec: &QuadratureSpec) -> Result<GibbsNormalizer, OracleError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let grid = build_grid(f, spec)?;
    let total: f64 = grid
        .values
        .iter()
        .zip(&grid.weights)
        .map(|(v, w)| w * (-spec.alpha * (v - grid.min_value)).exp())
        .sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(OracleError::Underflow);
    }
    Ok(GibbsNormalizer {
        shifted_integral: total,
        shift: grid.min_value,
    })
}

/// Mean of the Gibbs measure `exp(-alpha f) / Z` restricted to the box.
pub fn gibbs_mean<F>(f: &F, spec: &QuadratureSpec) -> Result<Vec<f64>, OracleError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let grid = build_grid(f, spec)?;
    let d = spec.dimension();
    let mut total = 0.0;
    let mut moment = vec![0.0; d];
    for ((node, v), w) in grid.nodes.iter().zip(&grid.values).zip(&grid.weights) {
        let e = w * (-spec.alpha * (v - grid.min_value)).exp();
        total += e;
        for (m, x) in moment.iter_mut().zip(node) {
            *m += e * x;
        }
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(OracleError::Underflow);
    }
    Ok(moment.into_iter().map(|m| m / total).collect())
}

/// [`gibbs_mean`] on the spec's grid and on the refined grid; fails if the
/// two differ by more than `tolerance` in any coordinate. Returns the refined
/// value.
pub fn gibbs_mean_refined<F>(f: &F, spec: &QuadratureSpec, tolerance: f64) -> Result<Vec<f64>, OracleError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let coarse = gibbs_mean(f, spec)?;
    let fine = gibbs_mean(f, &spec.refined())?;
    let change = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if change > tolerance {
        return Err(OracleError::NotConverged { change, tolerance });
    }
    Ok(fine)
}

/// `|gibbs_mean(alpha) - x*|` for each alpha, on the box and grid of `spec`.
pub fn laplace_gap<F>(f: &F, minimizer: &[f64], spec: &QuadratureSpec, alphas: &[f64]) -> Result<Vec<f64>, OracleError>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    if minimizer.len() != spec.dimension() {
        return Err(OracleError::InvalidSpec(
            "minimizer dimension differs from the box".into(),
        ));
    }
    if minimizer
        .iter()
        .zip(spec.lower.iter().zip(&spec.upper))
        .any(|(x, (l, u))| x < l || x > u)
    {
        return Err(OracleError::InvalidSpec("minimizer lies outside the box".into()));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let mean = gibbs_mean(f, &spec.with_alpha(alpha)?)?;
            Ok(mean
                .iter()
                .zip(minimizer)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt())
        })
        .collect()
}
