//! Bounded nonlinear least-squares fitting of the rate-distortion surface.
//!
//! Given measured `(rates, total distortion)` samples, [`fit_surface`] finds
//! the [`SurfaceParams`] minimizing the sum of squared residuals, with lower
//! bounds `alpha_j >= alpha_min` and `beta_j >= beta_min` keeping the model
//! convex and the allocator's logarithms defined. The solver is a
//! Levenberg-Marquardt trust-region iteration with analytic Jacobian and
//! projection onto the bounds.
//!
//! The problem is normalized internally before solving: each rate coordinate
//! is scaled by its maximum over the samples and distortions by their maximum
//! magnitude. This keeps the Jacobian columns comparably scaled regardless of
//! the units of the input data. The `cost_change_tol` / `gradient_tol`
//! stopping tests of [`FitOptions`] apply to this normalized problem.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::distortion::{RateVector, SurfaceParams};
use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// One measured point: a rate tuple and the total distortion observed there.
#[derive(Debug, Clone, PartialEq)]
pub struct RdSample {
    rates: RateVector,
    total_distortion: f64,
}

impl RdSample {
    pub fn new(rates: RateVector, total_distortion: f64) -> Result<Self> {
        if !total_distortion.is_finite() {
            return Err(Error::NonFinite {
                what: "total distortion",
                value: total_distortion,
            });
        }
        Ok(Self {
            rates,
            total_distortion,
        })
    }

    pub fn rates(&self) -> &RateVector {
        &self.rates
    }

    pub fn total_distortion(&self) -> f64 {
        self.total_distortion
    }
}

/// Solver bounds and stopping tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Cap on outer (Jacobian) iterations.
    pub max_iterations: usize,
    /// Stop when an accepted step reduces the normalized cost by less than
    /// this relative amount.
    pub cost_change_tol: f64,
    /// Stop when the projected gradient of the normalized cost has
    /// infinity-norm at most this value.
    pub gradient_tol: f64,
    /// Lower bound on every `alpha_j`.
    pub alpha_min: f64,
    /// Lower bound on every `beta_j`.
    pub beta_min: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_change_tol: 1e-12,
            gradient_tol: 1e-10,
            alpha_min: 1e-12,
            beta_min: 1e-12,
        }
    }
}

/// Fitted parameters plus goodness-of-fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: SurfaceParams,
    /// Coefficient of multiple determination. `None` when the samples have
    /// zero variance and the fit does not reproduce them exactly, in which
    /// case R^2 has no defined value.
    pub r_squared: Option<f64>,
    /// Mean of `observed - fitted`.
    pub residual_mean: f64,
    /// Largest absolute residual.
    pub residual_max_abs: f64,
    /// Outer iterations spent by the solver.
    pub iterations: usize,
    /// Whether a stopping tolerance was met before the iteration cap.
    pub converged: bool,
}

/// Fits the surface model to the samples by bounded least squares.
///
/// Requires at least `2N + 1` samples (one per free parameter), a consistent
/// rate dimension, and at least two distinct values in every rate
/// coordinate. On hitting the iteration cap the best parameters so far are
/// still returned, with `converged = false`.
pub fn fit_surface(samples: &[RdSample], options: &FitOptions) -> Result<FitReport> {
    let n = validate_design(samples)?;
    if options.alpha_min <= 0.0 {
        return Err(Error::NonPositiveParam {
            name: "alpha_min",
            index: 0,
            value: options.alpha_min,
        });
    }
    if options.beta_min <= 0.0 {
        return Err(Error::NonPositiveParam {
            name: "beta_min",
            index: 0,
            value: options.beta_min,
        });
    }

    // Work on a canonically ordered copy so that the result is bit-identical
    // under permutation of the input samples.
    let mut ordered: Vec<&RdSample> = samples.iter().collect();
    ordered.sort_by(|a, b| {
        let ra = a.rates().as_slice();
        let rb = b.rates().as_slice();
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|c| c.is_ne())
            .unwrap_or_else(|| a.total_distortion().total_cmp(&b.total_distortion()))
    });

    let problem = NormalizedProblem::build(&ordered, n, options);
    let theta0 = problem.initial_guess();
    let outcome = problem.solve(theta0, options);
    let params = problem.denormalize(&outcome.theta)?;

    let r_squared = match r_squared_ordered(&ordered, &params) {
        Ok(v) => Some(v),
        Err(Error::UndefinedRSquared) => None,
        Err(e) => return Err(e),
    };
    let (residual_mean, residual_max_abs) = residual_stats_ordered(&ordered, &params)?;

    Ok(FitReport {
        params,
        r_squared,
        residual_mean,
        residual_max_abs,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Coefficient of multiple determination, `1 - SS_res / SS_tot`.
///
/// Equals 1 for a perfect fit and can go negative for fits worse than the
/// mean predictor. When all observed distortions are identical (`SS_tot =
/// 0`) the value is defined as 1 if the residuals are exactly zero and is
/// otherwise an [`Error::UndefinedRSquared`].
pub fn r_squared(samples: &[RdSample], params: &SurfaceParams) -> Result<f64> {
    let refs: Vec<&RdSample> = samples.iter().collect();
    r_squared_ordered(&refs, params)
}

fn r_squared_ordered(samples: &[&RdSample], params: &SurfaceParams) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let m = samples.len() as f64;
    let mean = samples
        .iter()
        .map(|s| s.total_distortion())
        .sum::<f64>()
        / m;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for s in samples {
        let fitted = params.eval(s.rates().as_slice())?;
        ss_res += (s.total_distortion() - fitted).powi(2);
        ss_tot += (s.total_distortion() - mean).powi(2);
    }
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::UndefinedRSquared)
        }
    } else {
        Ok(1.0 - ss_res / ss_tot)
    }
}

/// Mean and maximum-absolute residual of `observed - fitted`.
pub fn residual_stats(samples: &[RdSample], params: &SurfaceParams) -> Result<(f64, f64)> {
    let refs: Vec<&RdSample> = samples.iter().collect();
    residual_stats_ordered(&refs, params)
}

fn residual_stats_ordered(samples: &[&RdSample], params: &SurfaceParams) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sum = 0.0;
    let mut max_abs: f64 = 0.0;
    for s in samples {
        let r = s.total_distortion() - params.eval(s.rates().as_slice())?;
        sum += r;
        max_abs = max_abs.max(r.abs());
    }
    Ok((sum / samples.len() as f64, max_abs))
}

/// Checks dimensions, sample count and per-coordinate identifiability;
/// returns the stream count.
fn validate_design(samples: &[RdSample]) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(Error::EmptySamples);
    };
    let n = first.rates().len();
    if n == 0 {
        return Err(Error::NoStreams);
    }
    for s in samples {
        if s.rates().len() != n {
            return Err(Error::DimensionMismatch {
                what: "rates",
                expected: n,
                got: s.rates().len(),
            });
        }
    }
    let needed = 2 * n + 1;
    if samples.len() < needed {
        return Err(Error::TooFewSamples {
            needed,
            got: samples.len(),
        });
    }
    for j in 0..n {
        let r0 = samples[0].rates()[j];
        if samples.iter().all(|s| s.rates()[j] == r0) {
            return Err(Error::DegenerateDesign { index: j });
        }
    }
    Ok(n)
}

struct LmOutcome {
    theta: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// The least-squares problem after scaling rates and distortions to order
/// one. Parameter layout: `[gamma, alpha_1.., beta_1..]`, all in normalized
/// units.
struct NormalizedProblem {
    rates: Vec<Vec<f64>>,
    d: Vec<f64>,
    n: usize,
    rate_scale: Vec<f64>,
    d_scale: f64,
    lower: Vec<f64>,
}

impl NormalizedProblem {
    fn build(ordered: &[&RdSample], n: usize, options: &FitOptions) -> Self {
        let mut rate_scale = vec![0.0f64; n];
        let mut d_scale = 0.0f64;
        for s in ordered {
            for j in 0..n {
                rate_scale[j] = rate_scale[j].max(s.rates()[j]);
            }
            d_scale = d_scale.max(s.total_distortion().abs());
        }
        // A coordinate with all-zero rates is rejected as degenerate before
        // this point, so every rate scale is positive.
        if d_scale == 0.0 {
            d_scale = 1.0;
        }
        let rates = ordered
            .iter()
            .map(|s| {
                (0..n)
                    .map(|j| s.rates()[j] / rate_scale[j])
                    .collect::<Vec<f64>>()
            })
            .collect();
        let d = ordered
            .iter()
            .map(|s| s.total_distortion() / d_scale)
            .collect();
        let mut lower = vec![f64::NEG_INFINITY; 2 * n + 1];
        for j in 0..n {
            lower[1 + j] = options.alpha_min / d_scale;
            lower[1 + n + j] = options.beta_min * rate_scale[j];
        }
        Self {
            rates,
            d,
            n,
            rate_scale,
            d_scale,
            lower,
        }
    }

    fn denormalize(&self, theta: &[f64]) -> Result<SurfaceParams> {
        let gamma = theta[0] * self.d_scale;
        let alphas: Vec<f64> = (0..self.n).map(|j| theta[1 + j] * self.d_scale).collect();
        let betas: Vec<f64> = (0..self.n)
            .map(|j| theta[1 + self.n + j] / self.rate_scale[j])
            .collect();
        SurfaceParams::new(gamma, alphas, betas)
    }

    fn model_value(&self, theta: &[f64], rates: &[f64]) -> f64 {
        let mut v = theta[0];
        for j in 0..self.n {
            v += theta[1 + j] * f64::exp2(-theta[1 + self.n + j] * rates[j]);
        }
        v
    }

    /// Fills `resid` with `d - model` and returns the cost (sum of squares).
    fn residuals(&self, theta: &[f64], resid: &mut [f64]) -> f64 {
        let mut cost = 0.0;
        for (k, rates) in self.rates.iter().enumerate() {
            let e = self.d[k] - self.model_value(theta, rates);
            resid[k] = e;
            cost += e * e;
        }
        cost
    }

    /// Jacobian of the model values with respect to the parameters.
    fn jacobian(&self, theta: &[f64], jac: &mut DMatrix<f64>) {
        for (k, rates) in self.rates.iter().enumerate() {
            jac[(k, 0)] = 1.0;
            for j in 0..self.n {
                let alpha = theta[1 + j];
                let beta = theta[1 + self.n + j];
                let decay = f64::exp2(-beta * rates[j]);
                jac[(k, 1 + j)] = decay;
                jac[(k, 1 + self.n + j)] = -alpha * rates[j] * LN_2 * decay;
            }
        }
    }

    /// Starting point: `gamma` from the smallest observed distortion, then a
    /// log-linear regression of the excess distortion against each rate
    /// coordinate, taken along the samples where the other coordinates are
    /// largest (there the other exponential terms are flattest and mostly
    /// cancel against the `gamma` estimate).
    fn initial_guess(&self) -> Vec<f64> {
        let n = self.n;
        let m = self.rates.len();
        let gamma0 = self.d.iter().cloned().fold(f64::INFINITY, f64::min);
        let d_range =
            self.d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - gamma0;
        let excess_floor = (1e-9 * d_range).max(1e-12);

        let mut theta = vec![0.0; 2 * n + 1];
        theta[0] = gamma0;
        for j in 0..n {
            let slice: Vec<usize> = if n == 1 {
                (0..m).collect()
            } else {
                // distance of each sample from the "other rates maximal" face
                let face: Vec<f64> = (0..m)
                    .map(|k| {
                        (0..n)
                            .filter(|&jj| jj != j)
                            .map(|jj| self.rates[k][jj])
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                let face_max = face.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exact: Vec<usize> = (0..m)
                    .filter(|&k| face[k] >= face_max - 1e-9 * face_max.abs().max(1.0))
                    .collect();
                if exact.len() >= 3 {
                    exact
                } else {
                    // scattered designs: fall back to the top quartile
                    let mut sorted = face.clone();
                    sorted.sort_by(f64::total_cmp);
                    let threshold = sorted[(3 * (m - 1)) / 4];
                    (0..m).filter(|&k| face[k] >= threshold).collect()
                }
            };
            let mut pts: Vec<(f64, f64)> = slice
                .iter()
                .filter_map(|&k| {
                    let excess = self.d[k] - gamma0;
                    (excess > excess_floor).then(|| (self.rates[k][j], f64::log2(excess)))
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

            let fallback = || {
                let r_min = self
                    .rates
                    .iter()
                    .map(|r| r[j])
                    .fold(f64::INFINITY, f64::min);
                let r_max = self
                    .rates
                    .iter()
                    .map(|r| r[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                (d_range, 1.0 / (r_max - r_min))
            };
            let (alpha0, beta0) = match line_fit(&pts) {
                Some((slope, intercept)) if slope < 0.0 && intercept.is_finite() => {
                    let alpha = f64::exp2(intercept);
                    let beta = -slope;
                    if alpha.is_finite() && alpha > 0.0 {
                        (alpha, beta)
                    } else {
                        fallback()
                    }
                }
                _ => fallback(),
            };
            // keep the starting exponentials alive on the unit-scaled grid
            theta[1 + j] = alpha0.clamp(self.lower[1 + j], self.lower[1 + j].max(1e9));
            theta[1 + n + j] = beta0.clamp(self.lower[1 + n + j], self.lower[1 + n + j].max(100.0));
        }
        theta
    }

    fn projected_gradient_inf(&self, theta: &[f64], jte: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..theta.len() {
            let grad = -2.0 * jte[i];
            let pg = if theta[i] <= self.lower[i] {
                grad.min(0.0)
            } else {
                grad
            };
            worst = worst.max(pg.abs());
        }
        worst
    }

    fn clamp(&self, theta: &mut [f64]) {
        for (t, lo) in theta.iter_mut().zip(&self.lower) {
            if *t < *lo {
                *t = *lo;
            }
        }
    }

    fn solve(&self, mut theta: Vec<f64>, options: &FitOptions) -> LmOutcome {
        let m = self.d.len();
        let p = theta.len();
        self.clamp(&mut theta);

        let mut resid = vec![0.0; m];
        let mut cost = self.residuals(&theta, &mut resid);
        let mut jac = DMatrix::zeros(m, p);
        let mut lambda = 1e-3;
        let mut iterations = 0;
        let mut converged = false;

        for iter in 1..=options.max_iterations {
            iterations = iter;
            self.jacobian(&theta, &mut jac);
            let jtj = jac.transpose() * &jac;
            let e = DVector::from_column_slice(&resid);
            let jte = jac.transpose() * e;

            if self.projected_gradient_inf(&theta, &jte) <= options.gradient_tol || cost == 0.0 {
                converged = true;
                break;
            }

            let mut accepted = false;
            for _ in 0..40 {
                let mut damped = jtj.clone();
                for i in 0..p {
                    damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(chol) = Cholesky::new(damped) else {
                    lambda *= 10.0;
                    continue;
                };
                let delta = chol.solve(&jte);
                let mut trial: Vec<f64> =
                    theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
                self.clamp(&mut trial);
                let mut trial_resid = vec![0.0; m];
                let trial_cost = self.residuals(&trial, &mut trial_resid);
                if trial_cost.is_finite() && trial_cost < cost {
                    let rel_drop = (cost - trial_cost) / cost;
                    theta = trial;
                    resid = trial_resid;
                    cost = trial_cost;
                    lambda = (lambda * 0.25).max(1e-14);
                    accepted = true;
                    if rel_drop <= options.cost_change_tol {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
            }
            if !accepted || converged {
                break;
            }
        }

        LmOutcome {
            theta,
            iterations,
            converged,
        }
    }
}

/// Ordinary least-squares line through `(x, y)` points; `None` when fewer
/// than two distinct abscissae remain.
fn line_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sum_x: f64 = pts.iter().map(|p| p.0).sum();
    let sum_y: f64 = pts.iter().map(|p| p.1).sum();
    let mean_x = sum_x / m;
    let mean_y = sum_y / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    Some((slope, mean_y - slope * mean_x))
}
