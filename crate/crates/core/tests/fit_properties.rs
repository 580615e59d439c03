//! Randomized fitter properties that need an independent reimplementation
//! of the optimality conditions: exact recovery, first-order optimality of
//! the returned parameters, and dominance over arbitrary candidate
//! parameters. Seeded, so failures reproduce.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdalloc_core::{
    fit_surface, r_squared, FitOptions, RateVector, RdSample, SurfaceParams,
};

fn draw_params(rng: &mut ChaCha8Rng, n: usize) -> SurfaceParams {
    let gamma = rng.random_range(0.0..5.0);
    let alphas: Vec<f64> = (0..n)
        .map(|_| 10f64.powf(rng.random_range(0.0..3.0)))
        .collect();
    let betas: Vec<f64> = (0..n)
        .map(|_| 10f64.powf(rng.random_range(-4.0..-1.0f64)))
        .collect();
    SurfaceParams::new(gamma, alphas, betas).unwrap()
}

/// Noiseless samples on a grid spanning three decay half-lives per axis.
fn grid_samples(truth: &SurfaceParams, per_axis: usize) -> Vec<RdSample> {
    let n = truth.n_streams();
    let mut samples = Vec::new();
    let mut index = vec![0usize; n];
    loop {
        let rates: Vec<f64> = (0..n)
            .map(|j| (3.0 / truth.betas()[j]) * index[j] as f64 / (per_axis - 1) as f64)
            .collect();
        let d = truth.eval(&rates).unwrap();
        samples.push(RdSample::new(RateVector::new(rates).unwrap(), d).unwrap());
        let mut j = n;
        loop {
            if j == 0 {
                return samples;
            }
            j -= 1;
            index[j] += 1;
            if index[j] < per_axis {
                break;
            }
            index[j] = 0;
        }
    }
}

/// Projected gradient of the normalized least-squares cost at `params`,
/// recomputed from scratch (rates scaled by their per-coordinate maxima,
/// distortions by their maximum magnitude, as documented by `fit_surface`).
fn projected_gradient_inf(
    samples: &[RdSample],
    params: &SurfaceParams,
    options: &FitOptions,
) -> f64 {
    let n = params.n_streams();
    let mut rate_scale = vec![0.0f64; n];
    let mut d_scale = 0.0f64;
    for s in samples {
        for j in 0..n {
            rate_scale[j] = rate_scale[j].max(s.rates()[j]);
        }
        d_scale = d_scale.max(s.total_distortion().abs());
    }
    if d_scale == 0.0 {
        d_scale = 1.0;
    }
    let gamma = params.gamma() / d_scale;
    let alphas: Vec<f64> = (0..n).map(|j| params.alphas()[j] / d_scale).collect();
    let betas: Vec<f64> = (0..n).map(|j| params.betas()[j] * rate_scale[j]).collect();

    let ln2 = std::f64::consts::LN_2;
    let mut grad = vec![0.0f64; 2 * n + 1];
    for s in samples {
        let r: Vec<f64> = (0..n).map(|j| s.rates()[j] / rate_scale[j]).collect();
        let mut fitted = gamma;
        for j in 0..n {
            fitted += alphas[j] * f64::exp2(-betas[j] * r[j]);
        }
        let e = s.total_distortion() / d_scale - fitted;
        grad[0] -= 2.0 * e;
        for j in 0..n {
            let decay = f64::exp2(-betas[j] * r[j]);
            grad[1 + j] -= 2.0 * e * decay;
            grad[1 + n + j] -= 2.0 * e * (-alphas[j] * r[j] * ln2 * decay);
        }
    }

    let mut worst = grad[0].abs();
    for j in 0..n {
        let at_alpha_bound = params.alphas()[j] <= options.alpha_min * (1.0 + 1e-9);
        let at_beta_bound = params.betas()[j] <= options.beta_min * (1.0 + 1e-9);
        let ga = if at_alpha_bound {
            grad[1 + j].min(0.0)
        } else {
            grad[1 + j]
        };
        let gb = if at_beta_bound {
            grad[1 + n + j].min(0.0)
        } else {
            grad[1 + n + j]
        };
        worst = worst.max(ga.abs()).max(gb.abs());
    }
    worst
}

#[test]
fn exact_recovery_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..60 {
        let n = 1 + trial % 3;
        let per_axis = [12, 7, 5][n - 1]; // >= 5 points per axis, ~100 samples
        let truth = draw_params(&mut rng, n);
        let samples = grid_samples(&truth, per_axis);
        let report = fit_surface(&samples, &FitOptions::default()).unwrap();
        assert!(report.converged, "trial {trial} did not converge");
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-9);
        assert!(
            rel(report.params.gamma(), truth.gamma()) <= 1e-6,
            "trial {trial}: gamma {} vs {}",
            report.params.gamma(),
            truth.gamma()
        );
        for j in 0..n {
            assert!(
                rel(report.params.alphas()[j], truth.alphas()[j]) <= 1e-6,
                "trial {trial}: alpha_{j}"
            );
            assert!(
                rel(report.params.betas()[j], truth.betas()[j]) <= 1e-6,
                "trial {trial}: beta_{j}"
            );
        }
    }
}

#[test]
fn first_order_optimality_at_returned_params() {
    let options = FitOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for trial in 0..40 {
        let truth = draw_params(&mut rng, 2);
        let samples = grid_samples(&truth, 8);
        let report = fit_surface(&samples, &options).unwrap();
        assert!(report.converged);
        let pg = projected_gradient_inf(&samples, &report.params, &options);
        assert!(
            pg <= options.gradient_tol,
            "trial {trial}: projected gradient {pg:.3e} above {:.1e}",
            options.gradient_tol
        );
    }
}

#[test]
fn fitter_beats_arbitrary_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..25 {
        let truth = draw_params(&mut rng, 2);
        let mut samples = grid_samples(&truth, 8);
        // mild noise so the optimum is not the generator itself
        for s in &mut samples {
            let wiggle = 1.0 + rng.random_range(-1e-3..1e-3);
            *s = RdSample::new(s.rates().clone(), s.total_distortion() * wiggle).unwrap();
        }
        let report = fit_surface(&samples, &FitOptions::default()).unwrap();
        let fitted_r2 = r_squared(&samples, &report.params).unwrap();
        for _ in 0..20 {
            let candidate = draw_params(&mut rng, 2);
            let candidate_r2 = r_squared(&samples, &candidate).unwrap();
            assert!(
                fitted_r2 >= candidate_r2 - 1e-12,
                "candidate {candidate:?} beat the fit: {candidate_r2} > {fitted_r2}"
            );
        }
        // the generator itself is also never better
        let truth_r2 = r_squared(&samples, &truth).unwrap();
        assert!(fitted_r2 >= truth_r2 - 1e-12);
    }
}
