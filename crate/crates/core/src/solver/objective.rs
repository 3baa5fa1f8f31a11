//! The joint objective `H(α, θ) = λ·G(α, θ) + (1 − λ)·F(α)` and its
//! gradients.
//!
//! With `r = Φ^(F)α − W′(θ)x^(F)` and `W′(θ) = diag(e^{jθf})`:
//!
//! ```text
//! G        = ‖r‖²
//! ∂H/∂α    = 2λ·Re{(Φ^(F))ᴴ r} + (1 − λ)·∇F(α)
//! ∂H/∂θ    = 2λ·Re{rᴴ ∂r/∂θ} = −2λ·Re{rᴴ·M·W′(θ)x^(F)},  M = diag(j·f)
//! ```
//!
//! `F` does not depend on `θ`, so the shift derivative only carries the data
//! term. Both gradients are checked against central differences in the tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::DictionarySpectrum;
use crate::sparsity::{smoothed_l0, smoothed_l0_grad};
use crate::spectral::{phase_ramp_bins, ShiftAngle, Spectrum};

/// Values of the three objective terms at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub h: f64,
    pub g: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub alpha: Vec<f64>,
    pub theta: f64,
    pub at: Evaluation,
}

/// `H` bound to one dictionary spectrum, one observed spectrum and one `λ`.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    phi_f: &'a DictionarySpectrum,
    x_f: &'a Spectrum,
    lambda: f64,
}

impl<'a> Objective<'a> {
    pub fn new(phi_f: &'a DictionarySpectrum, x_f: &'a Spectrum, lambda: f64) -> Result<Self> {
        if x_f.len() != phi_f.n() {
            return Err(Error::DimensionMismatch {
                what: "spectrum length",
                expected: phi_f.n(),
                found: x_f.len(),
            });
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        Ok(Self { phi_f, x_f, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.phi_f.m() {
            return Err(Error::DimensionMismatch {
                what: "coefficient count",
                expected: self.phi_f.m(),
                found: alpha.len(),
            });
        }
        Ok(())
    }

    /// Returns `(r, W′x^(F))`.
    fn residual_parts(&self, alpha: &[f64], theta: ShiftAngle) -> (Vec<Complex64>, Vec<Complex64>) {
        let ramped = phase_ramp_bins(self.x_f, theta.radians());
        let mut r = vec![Complex64::new(0.0, 0.0); self.phi_f.n()];
        self.phi_f.mul_real_into(alpha, &mut r);
        for (v, y) in r.iter_mut().zip(&ramped) {
            *v -= y;
        }
        (r, ramped)
    }

    pub fn residual(&self, alpha: &[f64], theta: ShiftAngle) -> Result<Spectrum> {
        self.check(alpha)?;
        Spectrum::new(self.residual_parts(alpha, theta).0)
    }

    pub fn g(&self, alpha: &[f64], theta: ShiftAngle) -> Result<f64> {
        self.check(alpha)?;
        Ok(norm_sqr(&self.residual_parts(alpha, theta).0))
    }

    pub fn evaluate(&self, alpha: &[f64], theta: ShiftAngle, sigma: f64) -> Result<Evaluation> {
        self.check(alpha)?;
        let g = norm_sqr(&self.residual_parts(alpha, theta).0);
        let f = smoothed_l0(alpha, sigma);
        Ok(Evaluation {
            h: self.lambda * g + (1.0 - self.lambda) * f,
            g,
            f,
        })
    }

    pub fn h(&self, alpha: &[f64], theta: ShiftAngle, sigma: f64) -> Result<f64> {
        Ok(self.evaluate(alpha, theta, sigma)?.h)
    }

    pub fn gradients(&self, alpha: &[f64], theta: ShiftAngle, sigma: f64) -> Result<Gradients> {
        self.check(alpha)?;
        let (r, ramped) = self.residual_parts(alpha, theta);
        let lambda = self.lambda;

        let data = self.phi_f.adjoint_real(&r);
        let sparse = smoothed_l0_grad(alpha, sigma);
        let grad_alpha = data
            .iter()
            .zip(&sparse)
            .map(|(d, s)| 2.0 * lambda * d + (1.0 - lambda) * s)
            .collect();

        // Re{conj(r_f)·(j f y_f)} = −f·Im{conj(r_f)·y_f}
        let cross: f64 = r
            .iter()
            .zip(&ramped)
            .enumerate()
            .map(|(f, (rv, y))| -(f as f64) * (rv.conj() * y).im)
            .sum();
        let grad_theta = -2.0 * lambda * cross;

        let g = norm_sqr(&r);
        let f = smoothed_l0(alpha, sigma);
        Ok(Gradients {
            alpha: grad_alpha,
            theta: grad_theta,
            at: Evaluation {
                h: lambda * g + (1.0 - lambda) * f,
                g,
                f,
            },
        })
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `r = Φ^(F)·α − W′(θ)·x^(F)`.
pub fn residual(
    phi_f: &DictionarySpectrum,
    alpha: &[f64],
    theta: ShiftAngle,
    x_f: &Spectrum,
) -> Result<Spectrum> {
    if x_f.len() != phi_f.n() {
        return Err(Error::DimensionMismatch {
            what: "spectrum length",
            expected: phi_f.n(),
            found: x_f.len(),
        });
    }
    // λ does not enter the residual; any admissible value works here
    Objective::new(phi_f, x_f, 0.5)?.residual(alpha, theta)
}

/// `G = ‖r‖²`.
pub fn objective_g(
    phi_f: &DictionarySpectrum,
    alpha: &[f64],
    theta: ShiftAngle,
    x_f: &Spectrum,
) -> Result<f64> {
    Ok(residual(phi_f, alpha, theta, x_f)?.norm_squared())
}

pub fn objective_h(
    phi_f: &DictionarySpectrum,
    alpha: &[f64],
    theta: ShiftAngle,
    x_f: &Spectrum,
    lambda: f64,
    sigma: f64,
) -> Result<f64> {
    Objective::new(phi_f, x_f, lambda)?.h(alpha, theta, sigma)
}

pub fn grad_alpha(
    phi_f: &DictionarySpectrum,
    alpha: &[f64],
    theta: ShiftAngle,
    x_f: &Spectrum,
    lambda: f64,
    sigma: f64,
) -> Result<Vec<f64>> {
    Ok(Objective::new(phi_f, x_f, lambda)?
        .gradients(alpha, theta, sigma)?
        .alpha)
}

pub fn grad_theta(
    phi_f: &DictionarySpectrum,
    alpha: &[f64],
    theta: ShiftAngle,
    x_f: &Spectrum,
    lambda: f64,
) -> Result<f64> {
    // σ only affects the α-gradient
    Ok(Objective::new(phi_f, x_f, lambda)?
        .gradients(alpha, theta, 1.0)?
        .theta)
}
