use crate::error::Result;
use crate::model::{CoefficientVector, Dictionary};
use crate::sparsity::{make_schedule, ScheduleParams};
use crate::spectral::Signal;

/// Step of the σ²-scaled ascent on `Σ exp(−αᵢ²/2σ²)`.
pub const SL0_STEP: f64 = 2.0;

/// Classical smoothed-ℓ0 recovery with no shift variable.
///
/// Starts from the minimum-ℓ2 solution; at each σ runs `inner_steps` of
/// `α ← α − μ·α·exp(−α²/2σ²)` followed by projection back onto `Φα = s`.
pub fn plain_sl0(
    dictionary: &Dictionary,
    s: &Signal,
    schedule: ScheduleParams,
    inner_steps: usize,
) -> Result<CoefficientVector> {
    let mut alpha = dictionary.min_l2_solution(s)?.into_inner();
    let sigmas = make_schedule(&alpha, schedule.sigma_min, schedule.decay)?;
    for &sigma in sigmas.values() {
        let denom = 2.0 * sigma * sigma;
        for _ in 0..inner_steps {
            for a in alpha.iter_mut() {
                *a -= SL0_STEP * *a * (-(*a * *a) / denom).exp();
            }
            project(dictionary, &mut alpha, s)?;
        }
    }
    CoefficientVector::new(alpha)
}

/// `α ← α − Φᵀ(ΦΦᵀ)⁻¹(Φα − s)`.
fn project(dictionary: &Dictionary, alpha: &mut [f64], s: &[f64]) -> Result<()> {
    let mut misfit = dictionary.apply(alpha)?;
    for (r, v) in misfit.iter_mut().zip(s) {
        *r -= v;
    }
    let correction = dictionary.min_l2_solution(&misfit)?;
    for (a, c) in alpha.iter_mut().zip(correction.iter()) {
        *a -= c;
    }
    Ok(())
}
