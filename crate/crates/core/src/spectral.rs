//! Discrete Fourier transform, circular shifts and the diagonal phase
//! operators used by the solver.
//!
//! Convention: forward transform with a negative exponent and no scaling,
//! inverse transform with a positive exponent and a `1/n` factor. Every other
//! module goes through these functions so the convention is fixed in one
//! place.
//!
//! Signal lengths here are small (tens of samples), so the transform is the
//! direct O(n²) sum. The twiddle table is indexed by `(f * t) mod n`, which
//! keeps the angles exact integers multiples of `2π/n`.

use std::f64::consts::TAU;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Real time-domain signal of length `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid(format!(
                "signal needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal samples"));
        }
        Ok(Self(samples))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl Deref for Signal {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Signal> for Vec<f64> {
    fn from(s: Signal) -> Self {
        s.0
    }
}

/// DFT coefficients; bin `f` runs over `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(Vec<Complex64>);

impl Spectrum {
    pub fn new(bins: Vec<Complex64>) -> Result<Self> {
        if bins.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrum bins"));
        }
        Ok(Self(bins))
    }

    /// Wraps bins that are finite by construction.
    pub(crate) fn from_bins(bins: Vec<Complex64>) -> Self {
        Self(bins)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum()
    }
}

impl Deref for Spectrum {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

/// Continuous circular shift expressed as an angle in `[0, 2π)`.
///
/// A shift of `k` samples on a length-`n` signal corresponds to
/// `theta = 2πk/n`; non-integer `k` are allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct ShiftAngle(f64);

impl ShiftAngle {
    /// Canonicalizes `theta` into `[0, 2π)`. Non-finite input maps to NaN and
    /// is reported by the caller that produced it.
    pub fn new(theta: f64) -> Self {
        let mut t = theta.rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative inputs
        if t >= TAU {
            t = 0.0;
        }
        Self(t)
    }

    pub fn from_samples(k: f64, n: usize) -> Self {
        Self::new(TAU * k / n as f64)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Shift in samples, `n·θ/2π`, always in `[0, n)`.
    pub fn shift_samples(self, n: usize) -> f64 {
        let k = n as f64 * self.0 / TAU;
        if k >= n as f64 {
            0.0
        } else {
            k
        }
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl From<f64> for ShiftAngle {
    fn from(theta: f64) -> Self {
        Self::new(theta)
    }
}

impl From<ShiftAngle> for f64 {
    fn from(a: ShiftAngle) -> Self {
        a.0
    }
}

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::cis(sign * TAU * i as f64 / n as f64))
        .collect()
}

/// Forward DFT of a real sequence. Works on any length, including the
/// columns of a dictionary.
pub fn dft_real(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let w = twiddles(n, -1.0);
    (0..n)
        .map(|f| {
            samples
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (t, &s)| {
                    acc + w[(f * t) % n] * s
                })
        })
        .collect()
}

/// `bins[f] = Σ_t s[t]·e^{−j2πft/n}`.
pub fn dft(s: &Signal) -> Spectrum {
    Spectrum::from_bins(dft_real(s))
}

/// Inverse DFT, `out[t] = (1/n)·Σ_f X[f]·e^{+j2πft/n}`. The output is complex
/// because a ramped spectrum is generally not conjugate-symmetric.
pub fn idft(x: &Spectrum) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let w = twiddles(n, 1.0);
    let scale = 1.0 / n as f64;
    (0..n)
        .map(|t| {
            x.iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (f, &b)| {
                    acc + w[(f * t) % n] * b
                })
                * scale
        })
        .collect()
}

/// Circular delay by `k` samples: `out[i] = s[(i − k) mod n]`. Negative `k`
/// advances the signal.
pub fn circular_shift(s: &Signal, k: i64) -> Signal {
    Signal(circular_shift_slice(s, k))
}

pub(crate) fn circular_shift_slice(s: &[f64], k: i64) -> Vec<f64> {
    let n = s.len();
    if n == 0 {
        return Vec::new();
    }
    let shift = k.rem_euclid(n as i64) as usize;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&s[n - shift..]);
    out.extend_from_slice(&s[..n - shift]);
    out
}

/// `out[f] = e^{jθf}·X[f]`, the diagonal operator `W′`. For `θ = 2πk/n` this
/// advances the underlying signal by `k` samples.
pub fn apply_phase_ramp(x: &Spectrum, theta: ShiftAngle) -> Spectrum {
    Spectrum::from_bins(phase_ramp_bins(x, theta.radians()))
}

pub(crate) fn phase_ramp_bins(x: &[Complex64], theta: f64) -> Vec<Complex64> {
    x.iter()
        .enumerate()
        .map(|(f, &b)| Complex64::cis(theta * f as f64) * b)
        .collect()
}

/// `out[f] = (j·f)·X[f]`, the diagonal operator `M`; the θ-derivative of the
/// phase ramp at `θ = 0`.
pub fn apply_m_ramp(x: &Spectrum) -> Spectrum {
    Spectrum::from_bins(
        x.iter()
            .enumerate()
            .map(|(f, &b)| Complex64::new(0.0, f as f64) * b)
            .collect(),
    )
}
