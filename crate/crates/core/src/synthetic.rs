//! Synthetic multi-task experiments and brute-force verification oracles.
//!
//! Real rate-distortion triplets come from encoding feature tensors at chosen
//! rates and re-measuring every task. This module replaces that pipeline at
//! desk scale: each task's distortion follows its own sum-of-exponentials
//! decay in the stream rates, measured performances are derived from it (plus
//! optional Gaussian noise), and the usual distortion/scalarization path
//! turns them back into fit-ready samples.
//!
//! When all tasks share the per-stream decay rates, the weighted total
//! distortion collapses exactly to the surface model with
//! `gamma = sum_i w_i g_i`, `alpha_j = sum_i w_i a_ij`, `beta_j = b_j`;
//! otherwise the surface is only an approximation, which is the realistic
//! regime.
//!
//! [`grid_search_allocation`] exhaustively minimizes the surface over the
//! budget simplex on a step lattice. It is deliberately independent of the
//! closed-form allocator so the two can check each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::allocator::{Allocation, Method};
use crate::distortion::{total_distortion, RateVector, SurfaceParams, TaskPerformance, WeightVector};
use crate::error::{Error, Result};
use crate::fit::RdSample;

/// Ground-truth distortion law of one synthetic task:
/// `D_i(R) = g_i + sum_j a_ij * 2^(-b_ij * R_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskModel {
    task_id: usize,
    baseline: f64,
    offset: f64,
    coeffs: Vec<f64>,
    decays: Vec<f64>,
}

impl SyntheticTaskModel {
    /// `baseline` is the task's uncompressed performance, `offset` the
    /// distortion floor `g_i` (nonnegative, so the implied distortion stays
    /// nonnegative at any rates), `coeffs` and `decays` the per-stream
    /// `a_ij >= 0` and `b_ij > 0`.
    pub fn new(
        task_id: usize,
        baseline: f64,
        offset: f64,
        coeffs: Vec<f64>,
        decays: Vec<f64>,
    ) -> Result<Self> {
        if !baseline.is_finite() {
            return Err(Error::NonFinite {
                what: "baseline performance",
                value: baseline,
            });
        }
        if baseline == 0.0 {
            return Err(Error::ZeroBaseline { task_id });
        }
        if !offset.is_finite() || offset < 0.0 {
            return Err(Error::InvalidTaskModel {
                task_id,
                what: "offset",
                value: offset,
            });
        }
        if decays.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                what: "decays",
                expected: coeffs.len(),
                got: decays.len(),
            });
        }
        for &value in &coeffs {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidTaskModel {
                    task_id,
                    what: "coeff",
                    value,
                });
            }
        }
        for &value in &decays {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidTaskModel {
                    task_id,
                    what: "decay",
                    value,
                });
            }
        }
        Ok(Self {
            task_id,
            baseline,
            offset,
            coeffs,
            decays,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn decays(&self) -> &[f64] {
        &self.decays
    }

    pub fn n_streams(&self) -> usize {
        self.coeffs.len()
    }

    /// True task distortion at the given rates.
    pub fn distortion_at(&self, rates: &[f64]) -> f64 {
        let mut d = self.offset;
        for j in 0..self.coeffs.len() {
            d += self.coeffs[j] * f64::exp2(-self.decays[j] * rates[j]);
        }
        d
    }
}

/// Where and how to sample: the rate tuples to visit, the relative noise on
/// the measured performances, and the RNG seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    rate_grid: Vec<RateVector>,
    noise_sigma: f64,
    seed: u64,
}

impl SamplingPlan {
    pub fn new(rate_grid: Vec<RateVector>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if rate_grid.is_empty() {
            return Err(Error::EmptySamples);
        }
        let n = rate_grid[0].len();
        for r in &rate_grid {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "grid rates",
                    expected: n,
                    got: r.len(),
                });
            }
        }
        if !noise_sigma.is_finite() || noise_sigma < 0.0 {
            return Err(Error::NegativeNoise(noise_sigma));
        }
        Ok(Self {
            rate_grid,
            noise_sigma,
            seed,
        })
    }

    /// Uniform lattice of `points_per_axis^n_streams` rate tuples over
    /// `[lo, hi]` per axis, ordered with the first axis varying slowest.
    pub fn uniform_grid(
        n_streams: usize,
        points_per_axis: usize,
        lo: f64,
        hi: f64,
    ) -> Result<Vec<RateVector>> {
        if n_streams == 0 {
            return Err(Error::NoStreams);
        }
        if points_per_axis == 0 {
            return Err(Error::EmptySamples);
        }
        let axis: Vec<f64> = if points_per_axis == 1 {
            vec![lo]
        } else {
            (0..points_per_axis)
                .map(|i| lo + (hi - lo) * i as f64 / (points_per_axis - 1) as f64)
                .collect()
        };
        let total = points_per_axis.pow(n_streams as u32);
        let mut grid = Vec::with_capacity(total);
        for mut index in 0..total {
            let mut rates = vec![0.0; n_streams];
            for j in (0..n_streams).rev() {
                rates[j] = axis[index % points_per_axis];
                index /= points_per_axis;
            }
            grid.push(RateVector::new(rates)?);
        }
        Ok(grid)
    }

    pub fn rate_grid(&self) -> &[RateVector] {
        &self.rate_grid
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_streams(&self) -> usize {
        self.rate_grid[0].len()
    }
}

/// Measured task performances at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfPoint {
    pub rates: RateVector,
    pub tasks: Vec<TaskPerformance>,
}

/// Simulates the measurement campaign: at every grid point each task's
/// performance is `baseline * (1 - D_i(R))` plus zero-mean Gaussian noise of
/// standard deviation `noise_sigma * baseline`.
///
/// Draws come from ChaCha8 seeded with the plan's seed (`seed_from_u64`),
/// one standard-normal variate per (grid point, task) in grid-point-major
/// order, so a fixed plan reproduces the dataset bit for bit.
pub fn generate_task_performances(
    models: &[SyntheticTaskModel],
    plan: &SamplingPlan,
) -> Result<Vec<PerfPoint>> {
    if models.is_empty() {
        return Err(Error::NoTasks);
    }
    let n = plan.n_streams();
    for model in models {
        if model.n_streams() != n {
            return Err(Error::DimensionMismatch {
                what: "model streams",
                expected: n,
                got: model.n_streams(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let normal = StandardNormal;
    let mut table = Vec::with_capacity(plan.rate_grid.len());
    for rates in &plan.rate_grid {
        let mut tasks = Vec::with_capacity(models.len());
        for model in models {
            let d = model.distortion_at(rates.as_slice());
            let z: f64 = normal.sample(&mut rng);
            let measured = model.baseline * (1.0 - d) + model.baseline * plan.noise_sigma * z;
            tasks.push(TaskPerformance::new(model.task_id, model.baseline, measured)?);
        }
        table.push(PerfPoint {
            rates: rates.clone(),
            tasks,
        });
    }
    Ok(table)
}

/// Scalarizes a performance table into fit-ready samples: per grid point,
/// task distortions from the relative performance drops, then their weighted
/// sum. Re-running with different weights reuses the same table; the
/// performances never need regenerating.
pub fn build_rd_samples(table: &[PerfPoint], weights: &WeightVector) -> Result<Vec<RdSample>> {
    let mut samples = Vec::with_capacity(table.len());
    for point in table {
        if point.tasks.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                what: "tasks at grid point",
                expected: weights.len(),
                got: point.tasks.len(),
            });
        }
        let distortions: Vec<f64> = point.tasks.iter().map(|t| t.distortion()).collect();
        let total = total_distortion(&distortions, weights)?;
        samples.push(RdSample::new(point.rates.clone(), total)?);
    }
    Ok(samples)
}

/// Exhaustive minimization of the surface over the budget simplex
/// `sum_j R_j = budget, R_j >= 0`, on the lattice with the given step.
///
/// Supports up to three streams (the lattice grows as
/// `(budget/step)^(N-1)`). Ties resolve to the lexicographically smallest
/// rate tuple. This is the verification oracle for the closed-form
/// allocator and shares no logic with it.
pub fn grid_search_allocation(
    params: &SurfaceParams,
    budget: f64,
    step: f64,
) -> Result<Allocation> {
    let n = params.n_streams();
    if n > 3 {
        return Err(Error::UnsupportedDimension { max: 3, got: n });
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::NonPositiveStep(step));
    }
    if !budget.is_finite() {
        return Err(Error::NonFinite {
            what: "budget",
            value: budget,
        });
    }
    if budget < 0.0 {
        return Err(Error::NegativeBudget(budget));
    }

    let gamma = params.gamma();
    let alphas = params.alphas();
    let betas = params.betas();
    // Lattice index range; the small slack absorbs division rounding so an
    // exactly representable multiple of `step` is never dropped.
    let k_max = ((budget / step) * (1.0 + 1e-12) + 1e-9).floor() as usize;

    let rates = match n {
        1 => vec![budget],
        2 => {
            // term tables per axis; the complement axis absorbs the remainder
            let r1: Vec<f64> = (0..=k_max).map(|i| i as f64 * step).collect();
            let r2: Vec<f64> = r1.iter().map(|&r| (budget - r).max(0.0)).collect();
            let t1: Vec<f64> = r1.iter().map(|&r| alphas[0] * f64::exp2(-betas[0] * r)).collect();
            let t2: Vec<f64> = r2.iter().map(|&r| alphas[1] * f64::exp2(-betas[1] * r)).collect();
            let mut best = f64::INFINITY;
            let mut best_i = 0;
            for i in 0..=k_max {
                let v = gamma + t1[i] + t2[i];
                if v < best {
                    best = v;
                    best_i = i;
                }
            }
            vec![r1[best_i], r2[best_i]]
        }
        3 => {
            let lattice: Vec<f64> = (0..=k_max).map(|i| i as f64 * step).collect();
            let remainder: Vec<f64> = lattice.iter().map(|&r| (budget - r).max(0.0)).collect();
            let t1: Vec<f64> = lattice
                .iter()
                .map(|&r| alphas[0] * f64::exp2(-betas[0] * r))
                .collect();
            let t2: Vec<f64> = lattice
                .iter()
                .map(|&r| alphas[1] * f64::exp2(-betas[1] * r))
                .collect();
            // third rate depends only on i + m, so table it by that sum
            let t3: Vec<f64> = remainder
                .iter()
                .map(|&r| alphas[2] * f64::exp2(-betas[2] * r))
                .collect();
            let mut best = f64::INFINITY;
            let mut best_i = 0;
            let mut best_m = 0;
            for i in 0..=k_max {
                let base = gamma + t1[i];
                for (m, (&b, &c)) in t2[..=k_max - i].iter().zip(&t3[i..=k_max]).enumerate() {
                    let v = base + b + c;
                    if v < best {
                        best = v;
                        best_i = i;
                        best_m = m;
                    }
                }
            }
            vec![lattice[best_i], lattice[best_m], remainder[best_i + best_m]]
        }
        _ => unreachable!("SurfaceParams guarantees at least one stream"),
    };

    let predicted = params.eval(&rates)?;
    Ok(Allocation {
        rates,
        budget,
        method: Method::GridSearch,
        predicted_distortion: Some(predicted),
        multiplier: None,
    })
}

/// The default desk-scale experiment: three tasks over two feature streams
/// with shared per-stream decays, so the exact surface parameters are known
/// in closed form (`gamma = sum w_i g_i`, `alpha_j = sum_i w_i a_ij`,
/// `beta_j = b_j`).
pub fn default_models() -> Vec<SyntheticTaskModel> {
    vec![
        SyntheticTaskModel::new(1, 90.0, 0.008, vec![0.10, 0.25], vec![7e-4, 2e-2]).unwrap(),
        SyntheticTaskModel::new(2, 12.5, 0.005, vec![0.06, 0.15], vec![7e-4, 2e-2]).unwrap(),
        SyntheticTaskModel::new(3, 28.0, 0.012, vec![0.20, 0.40], vec![7e-4, 2e-2]).unwrap(),
    ]
}

/// The default sampling plan: a 10x10 uniform grid over [50, 3000] kbits per
/// stream (100 points).
pub fn default_plan(noise_sigma: f64, seed: u64) -> Result<SamplingPlan> {
    SamplingPlan::new(
        SamplingPlan::uniform_grid(2, 10, 50.0, 3000.0)?,
        noise_sigma,
        seed,
    )
}

/// Exact surface parameters implied by task models with shared per-stream
/// decays. Errors with [`Error::InvalidTaskModel`] if the decays differ
/// across tasks (then no exact surface exists).
pub fn exact_surface_params(
    models: &[SyntheticTaskModel],
    weights: &WeightVector,
) -> Result<SurfaceParams> {
    if models.is_empty() {
        return Err(Error::NoTasks);
    }
    if models.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: models.len(),
            got: weights.len(),
        });
    }
    let n = models[0].n_streams();
    let decays = models[0].decays();
    for model in &models[1..] {
        if model.n_streams() != n {
            return Err(Error::DimensionMismatch {
                what: "model streams",
                expected: n,
                got: model.n_streams(),
            });
        }
        for j in 0..n {
            if model.decays()[j] != decays[j] {
                return Err(Error::InvalidTaskModel {
                    task_id: model.task_id(),
                    what: "decay (not shared across tasks)",
                    value: model.decays()[j],
                });
            }
        }
    }
    let gamma = models
        .iter()
        .zip(weights.as_slice())
        .map(|(m, w)| w * m.offset())
        .sum();
    let alphas: Vec<f64> = (0..n)
        .map(|j| {
            models
                .iter()
                .zip(weights.as_slice())
                .map(|(m, w)| w * m.coeffs()[j])
                .sum()
        })
        .collect();
    SurfaceParams::new(gamma, alphas, decays.to_vec())
}
