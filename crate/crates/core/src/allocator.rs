//! Bit allocation among feature streams under a total-rate budget.
//!
//! On the fitted convex surface the constrained minimum has a closed form:
//! equating the marginal distortion slopes across streams via a Lagrange
//! multiplier gives
//!
//! ```text
//! R_j* = (1/beta_j) * (log2(alpha_j * beta_j) - nu)
//! nu   = (sum_k (1/beta_k) * log2(alpha_k * beta_k) - R_t) / (sum_k 1/beta_k)
//! ```
//!
//! whose rates sum to the budget `R_t` by construction. Some `R_j*` can come
//! out negative when a stream's contribution is too weak to deserve rate; the
//! production entry point [`allocate_clipped`] pins those streams to zero and
//! re-solves over the remainder until the whole allocation is feasible.
//!
//! Baseline allocators (equal split and proportional-to-share splits) are
//! provided for comparison, plus [`compare_methods`] which evaluates them all
//! on the same surface.

use crate::distortion::SurfaceParams;
use crate::error::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// How an allocation was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Raw closed-form stationary point; rates may be negative.
    ClosedForm,
    /// Closed form with negative rates pinned to zero (active-set re-solve).
    /// This is the proposed production method.
    Clipped,
    /// Equal split of the budget (Method 1).
    Equal,
    /// Split proportional to tensor element counts (Method 2).
    PropElements,
    /// Split proportional to tensor element variances (Method 3).
    PropVariance,
    /// Exhaustive lattice search; used as a verification oracle.
    GridSearch,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Clipped => "clipped",
            Method::Equal => "equal",
            Method::PropElements => "prop_elements",
            Method::PropVariance => "prop_variance",
            Method::GridSearch => "grid_search",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-stream rates produced by one allocation method.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Rates in kbits per tensor. Sum to `budget`; nonnegative for every
    /// method except the raw [`Method::ClosedForm`] diagnostic.
    pub rates: Vec<f64>,
    /// Total rate constraint in kbits.
    pub budget: f64,
    pub method: Method,
    /// Surface distortion at `rates`, when a surface was available.
    pub predicted_distortion: Option<f64>,
    /// Lagrange multiplier (shared marginal slope magnitude) for the
    /// analytic methods.
    pub multiplier: Option<f64>,
}

impl Allocation {
    /// Returns a copy with `predicted_distortion` evaluated on `params`.
    pub fn evaluated_on(mut self, params: &SurfaceParams) -> Result<Self> {
        self.predicted_distortion = Some(params.eval(&self.rates)?);
        Ok(self)
    }
}

/// Element counts and elementwise variances of the feature tensors, the
/// inputs to the proportional baseline methods.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    element_counts: Vec<u64>,
    variances: Vec<f64>,
}

impl StreamStats {
    pub fn new(element_counts: Vec<u64>, variances: Vec<f64>) -> Result<Self> {
        if element_counts.is_empty() {
            return Err(Error::NoStreams);
        }
        if variances.len() != element_counts.len() {
            return Err(Error::DimensionMismatch {
                what: "variances",
                expected: element_counts.len(),
                got: variances.len(),
            });
        }
        for (index, &c) in element_counts.iter().enumerate() {
            if c == 0 {
                return Err(Error::ZeroElementCount { index });
            }
        }
        for (index, &value) in variances.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    what: "variance",
                    value,
                });
            }
            if value < 0.0 {
                return Err(Error::NegativeVariance { index, value });
            }
        }
        Ok(Self {
            element_counts,
            variances,
        })
    }

    pub fn n_streams(&self) -> usize {
        self.element_counts.len()
    }

    pub fn element_counts(&self) -> &[u64] {
        &self.element_counts
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn element_shares(&self) -> Vec<f64> {
        self.element_counts.iter().map(|&c| c as f64).collect()
    }

    pub fn variance_shares(&self) -> &[f64] {
        &self.variances
    }
}

/// Solves the stationarity system over a subset of streams; `active[j]`
/// selects the streams that share the budget. Returns `(rates, nu)` with
/// rates of inactive streams set to zero.
fn solve_active_set(params: &SurfaceParams, budget: f64, active: &[bool]) -> (Vec<f64>, f64) {
    let alphas = params.alphas();
    let betas = params.betas();
    if active.iter().filter(|&&a| a).count() == 1 {
        // a lone stream takes the whole budget exactly
        let j = active.iter().position(|&a| a).unwrap();
        let mut rates = vec![0.0; alphas.len()];
        rates[j] = budget;
        let nu = f64::log2(alphas[j] * betas[j]) - betas[j] * budget;
        return (rates, nu);
    }
    let mut inv_beta_sum = 0.0;
    let mut weighted_log_sum = 0.0;
    for j in 0..alphas.len() {
        if active[j] {
            inv_beta_sum += 1.0 / betas[j];
            weighted_log_sum += f64::log2(alphas[j] * betas[j]) / betas[j];
        }
    }
    let nu = (weighted_log_sum - budget) / inv_beta_sum;
    let rates = (0..alphas.len())
        .map(|j| {
            if active[j] {
                (f64::log2(alphas[j] * betas[j]) - nu) / betas[j]
            } else {
                0.0
            }
        })
        .collect();
    (rates, nu)
}

/// Closed-form optimal rates on the fitted surface for a total budget.
///
/// Exposes the raw stationary point: rates sum to the budget but individual
/// rates may be negative when a stream is too weak to deserve any of it. Use
/// [`allocate_clipped`] for a feasible allocation. The returned multiplier is
/// the common marginal slope magnitude `alpha_j * beta_j * ln(2) *
/// 2^(-beta_j * R_j*)`.
pub fn allocate_closed_form(params: &SurfaceParams, budget: f64) -> Result<Allocation> {
    if !budget.is_finite() {
        return Err(Error::NonFinite {
            what: "budget",
            value: budget,
        });
    }
    let active = vec![true; params.n_streams()];
    let (rates, nu) = solve_active_set(params, budget, &active);
    let predicted = params.eval(&rates)?;
    Ok(Allocation {
        rates,
        budget,
        method: Method::ClosedForm,
        predicted_distortion: Some(predicted),
        multiplier: Some(LN_2 * f64::exp2(nu)),
    })
}

/// Closed-form allocation with nonnegativity enforced by active-set
/// clipping: streams whose closed-form rate is negative are pinned to zero
/// and the system is re-solved over the remaining streams with the full
/// budget. The active set only shrinks, so this terminates within `N`
/// rounds. At the result, every pinned stream's marginal slope magnitude at
/// zero rate is at most the multiplier of the surviving set (KKT).
pub fn allocate_clipped(params: &SurfaceParams, budget: f64) -> Result<Allocation> {
    if !budget.is_finite() {
        return Err(Error::NonFinite {
            what: "budget",
            value: budget,
        });
    }
    if budget < 0.0 {
        return Err(Error::NegativeBudget(budget));
    }
    let n = params.n_streams();
    if budget == 0.0 {
        // only feasible point; the multiplier must dominate every slope at 0
        let lambda = (0..n)
            .map(|j| params.alphas()[j] * params.betas()[j] * LN_2)
            .fold(0.0f64, f64::max);
        let rates = vec![0.0; n];
        let predicted = params.eval(&rates)?;
        return Ok(Allocation {
            rates,
            budget,
            method: Method::Clipped,
            predicted_distortion: Some(predicted),
            multiplier: Some(lambda),
        });
    }
    let mut active = vec![true; n];
    loop {
        let (rates, nu) = solve_active_set(params, budget, &active);
        let mut any_clipped = false;
        for j in 0..n {
            if active[j] && rates[j] < 0.0 {
                active[j] = false;
                any_clipped = true;
            }
        }
        if !any_clipped {
            let predicted = params.eval(&rates)?;
            return Ok(Allocation {
                rates,
                budget,
                method: Method::Clipped,
                predicted_distortion: Some(predicted),
                multiplier: Some(LN_2 * f64::exp2(nu)),
            });
        }
        // A single stream can never be clipped: it gets exactly the
        // (nonnegative) budget, so the loop always terminates with a
        // nonempty active set.
        debug_assert!(active.iter().any(|&a| a));
    }
}

/// Method 1: every stream gets `budget / n_streams`.
pub fn allocate_equal(n_streams: usize, budget: f64) -> Result<Allocation> {
    if n_streams == 0 {
        return Err(Error::NoStreams);
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
    Ok(Allocation {
        rates: vec![budget / n_streams as f64; n_streams],
        budget,
        method: Method::Equal,
        predicted_distortion: None,
        multiplier: None,
    })
}

/// Methods 2 and 3: rates proportional to a nonnegative share vector
/// (element counts for Method 2, variances for Method 3).
pub fn allocate_proportional(shares: &[f64], budget: f64) -> Result<Allocation> {
    if shares.is_empty() {
        return Err(Error::NoStreams);
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
    for (index, &value) in shares.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "share",
                value,
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeVariance { index, value });
        }
    }
    let total: f64 = shares.iter().sum();
    if total == 0.0 {
        return Err(Error::AllZeroShares);
    }
    Ok(Allocation {
        rates: shares.iter().map(|s| budget * s / total).collect(),
        budget,
        method: Method::PropElements,
        predicted_distortion: None,
        multiplier: None,
    })
}

/// One row of a method comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    pub allocation: Allocation,
}

/// Runs the proposed allocator and the three baselines at one budget and
/// evaluates each allocation on the surface. The proposed (clipped) row is
/// optimal on the fitted surface, so its predicted distortion never exceeds
/// any baseline's.
pub fn compare_methods(
    params: &SurfaceParams,
    stats: &StreamStats,
    budget: f64,
) -> Result<Vec<ComparisonRow>> {
    let n = params.n_streams();
    if stats.n_streams() != n {
        return Err(Error::DimensionMismatch {
            what: "stream stats",
            expected: n,
            got: stats.n_streams(),
        });
    }
    let proposed = allocate_clipped(params, budget)?;
    let equal = allocate_equal(n, budget)?.evaluated_on(params)?;
    let mut by_elements =
        allocate_proportional(&stats.element_shares(), budget)?.evaluated_on(params)?;
    by_elements.method = Method::PropElements;
    let mut by_variance =
        allocate_proportional(stats.variance_shares(), budget)?.evaluated_on(params)?;
    by_variance.method = Method::PropVariance;
    Ok(vec![
        ComparisonRow {
            method: Method::Clipped,
            allocation: proposed,
        },
        ComparisonRow {
            method: Method::Equal,
            allocation: equal,
        },
        ComparisonRow {
            method: Method::PropElements,
            allocation: by_elements,
        },
        ComparisonRow {
            method: Method::PropVariance,
            allocation: by_variance,
        },
    ])
}
