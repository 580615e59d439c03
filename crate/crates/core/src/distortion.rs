//! Task distortions and the convex rate-distortion surface model.
//!
//! Distortion for one task is the relative performance drop against the
//! uncompressed baseline. The total distortion is a positive weighted sum of
//! task distortions, and its dependence on the per-stream rates is modeled by
//! the convex surface
//!
//! ```text
//! D_t(R_1, ..., R_N) = gamma + sum_j alpha_j * 2^(-beta_j * R_j)
//! ```
//!
//! with `alpha_j > 0`, `beta_j > 0`. Rates are in kbits per tensor throughout;
//! distortions are dimensionless fractions (multiply by 100 for display as
//! percentages).

use crate::error::{Error, Result};

/// Uncompressed-baseline and compressed performance of one task, in the
/// task's native metric units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskPerformance {
    task_id: usize,
    baseline: f64,
    measured: f64,
}

impl TaskPerformance {
    /// `baseline` is the performance without tensor compression, `measured`
    /// with compression, both on the same metric. The baseline must be
    /// nonzero since distortion is relative to it.
    pub fn new(task_id: usize, baseline: f64, measured: f64) -> Result<Self> {
        if !baseline.is_finite() {
            return Err(Error::NonFinite {
                what: "baseline performance",
                value: baseline,
            });
        }
        if !measured.is_finite() {
            return Err(Error::NonFinite {
                what: "measured performance",
                value: measured,
            });
        }
        if baseline == 0.0 {
            return Err(Error::ZeroBaseline { task_id });
        }
        Ok(Self {
            task_id,
            baseline,
            measured,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn measured(&self) -> f64 {
        self.measured
    }

    /// Task distortion: the fraction of performance lost to compression,
    /// `(baseline - measured) / baseline`. Zero exactly when the measured
    /// performance equals the baseline; negative when compression happened to
    /// help the task (permitted, and propagated as-is).
    pub fn distortion(&self) -> f64 {
        (self.baseline - self.measured) / self.baseline
    }
}

/// Strictly positive task weights for scalarizing multi-task distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::NoTasks);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "task weight",
                    value,
                });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        Ok(Self(weights))
    }

    /// Unit weights for `n` tasks.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Weighted total distortion over `M` tasks: `sum_i w_i * D_i`.
///
/// Linear in both arguments, so changing weights never requires recomputing
/// the per-task distortions.
pub fn total_distortion(distortions: &[f64], weights: &WeightVector) -> Result<f64> {
    if distortions.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "task distortions",
            expected: weights.len(),
            got: distortions.len(),
        });
    }
    Ok(distortions
        .iter()
        .zip(weights.as_slice())
        .map(|(d, w)| w * d)
        .sum())
}

/// Parameters of the fitted rate-distortion surface
/// `gamma + sum_j alpha_j * 2^(-beta_j * R_j)`.
///
/// All `alpha_j` and `beta_j` are strictly positive, which makes the surface
/// strictly decreasing and strictly convex in every rate and keeps the
/// closed-form allocator's logarithms defined. `gamma` is the residual
/// distortion floor at unbounded rates and may take any finite value.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceParams {
    gamma: f64,
    alphas: Vec<f64>,
    betas: Vec<f64>,
}

impl SurfaceParams {
    pub fn new(gamma: f64, alphas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if !gamma.is_finite() {
            return Err(Error::NonFinite {
                what: "gamma",
                value: gamma,
            });
        }
        if alphas.is_empty() {
            return Err(Error::NoStreams);
        }
        if betas.len() != alphas.len() {
            return Err(Error::DimensionMismatch {
                what: "betas",
                expected: alphas.len(),
                got: betas.len(),
            });
        }
        for (index, &value) in alphas.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "alpha",
                    value,
                });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveParam {
                    name: "alpha",
                    index,
                    value,
                });
            }
        }
        for (index, &value) in betas.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "beta",
                    value,
                });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveParam {
                    name: "beta",
                    index,
                    value,
                });
            }
        }
        Ok(Self {
            gamma,
            alphas,
            betas,
        })
    }

    /// Number of streams `N`.
    pub fn n_streams(&self) -> usize {
        self.alphas.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Evaluates the surface at the given rates (kbits per tensor).
    ///
    /// Rates may be negative (the closed-form allocator's raw output can be),
    /// in which case the exponential terms simply exceed their `R = 0` value.
    pub fn eval(&self, rates: &[f64]) -> Result<f64> {
        self.check_dim(rates.len())?;
        let mut total = self.gamma;
        for j in 0..self.alphas.len() {
            total += self.alphas[j] * f64::exp2(-self.betas[j] * rates[j]);
        }
        Ok(total)
    }

    /// Partial derivatives of the surface with respect to each rate:
    /// component `j` is `-alpha_j * beta_j * ln(2) * 2^(-beta_j * R_j)`.
    /// Every component is strictly negative (more rate always helps).
    pub fn gradient(&self, rates: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(rates.len())?;
        Ok((0..self.alphas.len())
            .map(|j| {
                -self.alphas[j]
                    * self.betas[j]
                    * std::f64::consts::LN_2
                    * f64::exp2(-self.betas[j] * rates[j])
            })
            .collect())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.alphas.len() {
            return Err(Error::DimensionMismatch {
                what: "rates",
                expected: self.alphas.len(),
                got,
            });
        }
        Ok(())
    }
}

/// Evaluates the surface model at a rate tuple. See [`SurfaceParams::eval`].
pub fn eval_surface(params: &SurfaceParams, rates: &[f64]) -> Result<f64> {
    params.eval(rates)
}

/// Analytic gradient of the surface model. See [`SurfaceParams::gradient`].
pub fn surface_gradient(params: &SurfaceParams, rates: &[f64]) -> Result<Vec<f64>> {
    params.gradient(rates)
}

/// Nonnegative per-stream rates in kbits per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        for (index, &value) in rates.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "rate",
                    value,
                });
            }
            if value < 0.0 {
                return Err(Error::NegativeRate { index, value });
            }
        }
        Ok(Self(rates))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}
