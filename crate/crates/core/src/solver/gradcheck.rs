//! Finite-difference check of the analytic gradients of `H`.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{derive_seed, generate_dictionary};
use crate::spectral::{dft, ShiftAngle, Signal};

use super::Objective;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Pass threshold on the reported relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub n: usize,
    pub m: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            n: 8,
            m: 16,
            points: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub config: GradCheckConfig,
    pub max_rel_error_alpha: f64,
    pub max_rel_error_theta: f64,
    pub max_rel_error: f64,
    pub passed: bool,
}

/// `|a − b| / max(1, |a|, |b|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Samples random `(α, θ, λ, σ)` on a random problem and compares the
/// analytic gradients against central differences of `H`.
pub fn gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.points == 0 {
        return Err(invalid("gradcheck needs at least one point"));
    }
    let dictionary = generate_dictionary(config.n, config.m, derive_seed(config.seed, 1), true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let x = Signal::new((0..config.n).map(|_| rng.sample(StandardNormal)).collect())?;
    let x_f = dft(&x);

    let mut worst_alpha = 0.0f64;
    let mut worst_theta = 0.0f64;
    for _ in 0..config.points {
        let alpha: Vec<f64> = (0..config.m).map(|_| rng.sample(StandardNormal)).collect();
        let theta = rng.random_range(0.0..TAU);
        let lambda = rng.random_range(0.05..0.95);
        let sigma = rng.random_range(0.1..2.0);

        let objective = Objective::new(dictionary.spectrum(), &x_f, lambda)?;
        let grads = objective.gradients(&alpha, ShiftAngle::new(theta), sigma)?;
        let h = |a: &[f64], t: f64| objective.h(a, ShiftAngle::new(t), sigma);

        let mut probe = alpha.clone();
        for i in 0..config.m {
            probe[i] = alpha[i] + FD_STEP;
            let plus = h(&probe, theta)?;
            probe[i] = alpha[i] - FD_STEP;
            let minus = h(&probe, theta)?;
            probe[i] = alpha[i];
            let fd = (plus - minus) / (2.0 * FD_STEP);
            worst_alpha = worst_alpha.max(relative_error(grads.alpha[i], fd));
        }
        let fd = (h(&alpha, theta + FD_STEP)? - h(&alpha, theta - FD_STEP)?) / (2.0 * FD_STEP);
        worst_theta = worst_theta.max(relative_error(grads.theta, fd));
    }
    let max_rel_error = worst_alpha.max(worst_theta);
    Ok(GradCheckReport {
        config: *config,
        max_rel_error_alpha: worst_alpha,
        max_rel_error_theta: worst_theta,
        max_rel_error,
        passed: max_rel_error < GRADCHECK_TOLERANCE,
    })
}
