//! Smoothed ℓ0 measure and the decreasing σ schedule.
//!
//! `F(α) = m − Σᵢ exp(−αᵢ²/2σ²)` counts nonzero entries as `σ → 0` and tends
//! to a scaled squared ℓ2 norm as `σ → ∞`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Exponents below this are treated as exactly zero.
const MIN_EXPONENT: f64 = -745.0;

fn gaussian(v: f64, sigma: f64) -> f64 {
    let e = -(v * v) / (2.0 * sigma * sigma);
    if e < MIN_EXPONENT {
        0.0
    } else {
        e.exp()
    }
}

/// Smoothing width of the ℓ0 surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedL0Params {
    pub sigma: f64,
}

impl SmoothedL0Params {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }
}

pub fn smoothed_l0(alpha: &[f64], sigma: f64) -> f64 {
    let kept: f64 = alpha.iter().map(|&a| gaussian(a, sigma)).sum();
    alpha.len() as f64 - kept
}

/// Gradient of [`smoothed_l0`]: `αᵢ·exp(−αᵢ²/2σ²)/σ²`.
pub fn smoothed_l0_grad(alpha: &[f64], sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (sigma * sigma);
    alpha
        .iter()
        .map(|&a| a * gaussian(a, sigma) * inv)
        .collect()
}

/// Knobs for [`make_schedule`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub sigma_min: f64,
    pub decay: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            sigma_min: 0.01,
            decay: 0.5,
        }
    }
}

impl ScheduleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return Err(invalid(format!(
                "sigma_min must be positive, got {}",
                self.sigma_min
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(invalid(format!(
                "decay must lie in (0, 1), got {}",
                self.decay
            )));
        }
        Ok(())
    }

    /// First schedule value for a starting point: `max(2·max|α₀|, σ_min)`.
    pub fn initial_sigma(&self, alpha0: &[f64]) -> f64 {
        let peak = alpha0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        (2.0 * peak).max(self.sigma_min)
    }
}

/// Strictly decreasing positive sequence `σ₁ > … > σ_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule(Vec<f64>);

impl SigmaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sigma schedule is empty"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid("sigma schedule values must be positive and finite"));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sigma schedule must be strictly decreasing"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// Geometric schedule from `max(2·max|α₀|, σ_min)` down to the first value at
/// or below `σ_min`.
pub fn make_schedule(alpha0: &[f64], sigma_min: f64, decay: f64) -> Result<SigmaSchedule> {
    let params = ScheduleParams { sigma_min, decay };
    params.validate()?;
    let mut values = vec![params.initial_sigma(alpha0)];
    let mut s = values[0];
    while s > sigma_min {
        s *= decay;
        values.push(s);
    }
    SigmaSchedule::new(values)
}
