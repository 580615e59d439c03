//! Rate-distortion surface fitting and bit allocation for multi-stream
//! feature compression.
//!
//! When a split DNN ships several intermediate feature tensors over a
//! channel, the total bit budget has to be divided among the streams. This
//! crate models the joint multi-task distortion as a convex surface in the
//! per-stream rates, fits that surface to measured samples, and computes the
//! budget split minimizing it:
//!
//! - [`distortion`] — task distortions, their weighted scalarization, and
//!   the surface model `gamma + sum_j alpha_j 2^(-beta_j R_j)`.
//! - [`fit`] — bounded trust-region least squares fitting of the surface,
//!   with R^2 and residual diagnostics.
//! - [`allocator`] — the closed-form budget split, active-set clipping to
//!   nonnegative rates, and the equal/proportional baseline methods.
//! - [`synthetic`] — reproducible synthetic measurement campaigns and a
//!   brute-force lattice oracle for verifying fitter and allocator.
//!
//! Rates are kbits per tensor throughout; distortions are dimensionless
//! fractions. Everything is a pure function of its inputs, so fitted
//! surfaces and allocators can be shared freely across threads.

pub mod allocator;
pub mod distortion;
pub mod error;
pub mod fit;
pub mod synthetic;

pub use allocator::{
    allocate_clipped, allocate_closed_form, allocate_equal, allocate_proportional,
    compare_methods, Allocation, ComparisonRow, Method, StreamStats,
};
pub use distortion::{
    eval_surface, surface_gradient, total_distortion, RateVector, SurfaceParams,
    TaskPerformance, WeightVector,
};
pub use error::{Error, Result};
pub use fit::{fit_surface, r_squared, residual_stats, FitOptions, FitReport, RdSample};
pub use synthetic::{
    build_rd_samples, default_models, default_plan, exact_surface_params,
    generate_task_performances, grid_search_allocation, PerfPoint, SamplingPlan,
    SyntheticTaskModel,
};
