//! Dictionaries, synthetic instances and the minimum-ℓ2-norm solve.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{circular_shift_slice, dft_real, Signal};

/// Largest accepted condition number of `ΦΦᵀ`.
pub const CONDITION_LIMIT: f64 = 1e12;

const UNIT_NORM_TOL: f64 = 1e-12;

/// Mixes `stream` into `seed` (splitmix64 finalizer) so that independent
/// random streams can be keyed off a single trial seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Real coefficient vector `α`, one entry per atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    /// Unit vector `e_i` of length `m`.
    pub fn basis(m: usize, i: usize) -> Self {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        Self(v)
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

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Index of the largest-magnitude entry (first one on ties).
    pub fn argmax_abs(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.0.iter().enumerate() {
            if best.is_none_or(|(_, b)| v.abs() > b) {
                best = Some((i, v.abs()));
            }
        }
        best.map(|(i, _)| i)
    }
}

impl Deref for CoefficientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(c: CoefficientVector) -> Self {
        c.0
    }
}

/// Column-wise DFT of a dictionary, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionarySpectrum {
    n: usize,
    m: usize,
    columns: Vec<Complex64>,
}

impl DictionarySpectrum {
    fn from_atoms(atoms: &DMatrix<f64>) -> Self {
        let (n, m) = atoms.shape();
        let mut columns = Vec::with_capacity(n * m);
        for col in atoms.as_slice().chunks_exact(n) {
            columns.extend(dft_real(col));
        }
        Self { n, m, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        &self.columns[i * self.n..(i + 1) * self.n]
    }

    /// `Φ^(F)·α` into `out` (length `n`).
    pub(crate) fn mul_real_into(&self, alpha: &[f64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (col, &a) in self.columns.chunks_exact(self.n).zip(alpha) {
            if a == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * a;
            }
        }
    }

    /// `Re{(Φ^(F))ᴴ·r}`.
    pub(crate) fn adjoint_real(&self, r: &[Complex64]) -> Vec<f64> {
        self.columns
            .chunks_exact(self.n)
            .map(|col| {
                col.iter()
                    .zip(r)
                    .map(|(c, v)| c.re * v.re + c.im * v.im)
                    .sum()
            })
            .collect()
    }
}

/// An `n × m` matrix of real atoms with its cached spectrum and a Cholesky
/// factorization of `ΦΦᵀ`. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    spectrum: DictionarySpectrum,
    gram: Cholesky<f64, Dyn>,
    condition: f64,
    unit_norm: bool,
}

impl Dictionary {
    /// Validates `atoms` (finite, no zero column, well-conditioned `ΦΦᵀ`) and
    /// builds the cached factorization and spectrum.
    pub fn new(atoms: DMatrix<f64>) -> Result<Self> {
        let (n, m) = atoms.shape();
        if n < 2 || m == 0 {
            return Err(invalid(format!(
                "dictionary must be at least 2×1, got {n}×{m}"
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary atoms"));
        }
        let norms: Vec<f64> = atoms.column_iter().map(|c| c.norm()).collect();
        if let Some(i) = norms.iter().position(|&v| v == 0.0) {
            return Err(Error::ZeroAtom(i));
        }
        let unit_norm = norms.iter().all(|v| (v - 1.0).abs() <= UNIT_NORM_TOL);

        let g = &atoms * atoms.transpose();
        let eig = SymmetricEigen::new(g.clone()).eigenvalues;
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                condition,
                limit: CONDITION_LIMIT,
            });
        }
        let gram = Cholesky::new(g).ok_or(Error::IllConditioned {
            condition,
            limit: CONDITION_LIMIT,
        })?;
        let spectrum = DictionarySpectrum::from_atoms(&atoms);
        Ok(Self {
            atoms,
            spectrum,
            gram,
            condition,
            unit_norm,
        })
    }

    pub fn from_row_major(n: usize, m: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                what: "dictionary entries",
                expected: n * m,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, m, data))
    }

    /// Builds a dictionary from equal-length atoms.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "atom length",
                expected: n,
                found: bad.len(),
            });
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(DMatrix::from_column_slice(n, columns.len(), &flat))
    }

    pub fn n(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn m(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.atoms.as_slice()[i * n..(i + 1) * n]
    }

    pub fn spectrum(&self) -> &DictionarySpectrum {
        &self.spectrum
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// True when every column has unit ℓ2 norm (to 1e-12).
    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    /// `Φ·α`.
    pub fn apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check_coefficients(alpha)?;
        Ok((&self.atoms * DVector::from_column_slice(alpha))
            .data
            .into())
    }

    /// Minimum-norm solution of `Φα = s`, `α = Φᵀ(ΦΦᵀ)⁻¹s`, using the cached
    /// factorization.
    pub fn min_l2_solution(&self, s: &[f64]) -> Result<CoefficientVector> {
        if s.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "signal length",
                expected: self.n(),
                found: s.len(),
            });
        }
        let y = self.gram.solve(&DVector::from_column_slice(s));
        let alpha: Vec<f64> = self.atoms.tr_mul(&y).data.into();
        CoefficientVector::new(alpha)
    }

    fn check_coefficients(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.m() {
            return Err(Error::DimensionMismatch {
                what: "coefficient count",
                expected: self.m(),
                found: alpha.len(),
            });
        }
        Ok(())
    }
}

/// I.i.d. standard Gaussian `n × m` dictionary, optionally with unit-norm
/// columns. Deterministic in `seed`.
pub fn generate_dictionary(n: usize, m: usize, seed: u64, unit_norm: bool) -> Result<Dictionary> {
    if n < 2 || m < n {
        return Err(invalid(format!("need m >= n >= 2, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut atoms = DMatrix::<f64>::from_fn(n, m, |_, _| 0.0);
    for mut col in atoms.column_iter_mut() {
        for v in col.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if unit_norm {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }
    Dictionary::new(atoms)
}

/// Bernoulli-Gaussian coefficient prior: active with probability `p`
/// (drawn from `N(0, sigma_on²)`), otherwise drawn from `N(0, sigma_off²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliGaussianModel {
    pub p: f64,
    pub sigma_on: f64,
    pub sigma_off: f64,
}

impl Default for BernoulliGaussianModel {
    fn default() -> Self {
        Self {
            p: 0.1,
            sigma_on: 1.0,
            sigma_off: 0.01,
        }
    }
}

impl BernoulliGaussianModel {
    pub fn new(p: f64, sigma_on: f64, sigma_off: f64) -> Result<Self> {
        let model = Self {
            p,
            sigma_on,
            sigma_off,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!(
                "activity probability {} outside [0, 1]",
                self.p
            )));
        }
        if !(self.sigma_off > 0.0 && self.sigma_off.is_finite()) {
            return Err(invalid(format!(
                "sigma_off must be positive, got {}",
                self.sigma_off
            )));
        }
        if !(self.sigma_on > self.sigma_off && self.sigma_on.is_finite()) {
            return Err(invalid(format!(
                "sigma_on ({}) must exceed sigma_off ({})",
                self.sigma_on, self.sigma_off
            )));
        }
        Ok(())
    }
}

/// Draws `m` coefficients from the Bernoulli-Gaussian mixture.
pub fn sample_coefficients(
    model: &BernoulliGaussianModel,
    m: usize,
    seed: u64,
) -> Result<CoefficientVector> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let on = Normal::new(0.0, model.sigma_on).map_err(|e| invalid(e.to_string()))?;
    let off = Normal::new(0.0, model.sigma_off).map_err(|e| invalid(e.to_string()))?;
    let values = (0..m)
        .map(|_| {
            if rng.random::<f64>() < model.p {
                on.sample(&mut rng)
            } else {
                off.sample(&mut rng)
            }
        })
        .collect();
    Ok(CoefficientVector(values))
}

/// Exactly `active` nonzero entries at uniformly chosen positions, each drawn
/// from `N(0, sigma_on²)`; all other entries are exactly zero.
pub fn sample_exact_sparse(
    m: usize,
    active: usize,
    sigma_on: f64,
    seed: u64,
) -> Result<CoefficientVector> {
    if active > m {
        return Err(invalid(format!(
            "cannot place {active} active entries in {m} slots"
        )));
    }
    let dist = Normal::new(0.0, sigma_on).map_err(|e| invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = index::sample(&mut rng, m, active).into_vec();
    support.sort_unstable();
    let mut values = vec![0.0; m];
    for i in support {
        values[i] = dist.sample(&mut rng);
    }
    Ok(CoefficientVector(values))
}

/// Exactly `active` entries equal to `±amplitude` with independent fair signs.
pub fn sample_signed_sparse(
    m: usize,
    active: usize,
    amplitude: f64,
    seed: u64,
) -> Result<CoefficientVector> {
    if active > m {
        return Err(invalid(format!(
            "cannot place {active} active entries in {m} slots"
        )));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(invalid(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = index::sample(&mut rng, m, active).into_vec();
    support.sort_unstable();
    let mut values = vec![0.0; m];
    for i in support {
        values[i] = if rng.random_bool(0.5) {
            amplitude
        } else {
            -amplitude
        };
    }
    Ok(CoefficientVector(values))
}

/// A generated problem: `observed = circular_shift(Φα + noise, k_true)`.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub dictionary: Dictionary,
    pub alpha_true: CoefficientVector,
    pub k_true: usize,
    pub sigma_noise: f64,
    pub noise: Vec<f64>,
    pub observed: Signal,
    pub seed: u64,
    /// Prior the coefficients came from, when known.
    pub model: Option<BernoulliGaussianModel>,
}

impl SyntheticInstance {
    /// The unshifted clean signal `Φα`.
    pub fn clean_signal(&self) -> Vec<f64> {
        self.dictionary
            .apply(&self.alpha_true)
            .expect("instance dimensions are consistent by construction")
    }

    /// FNV-1a hash over the instance contents, for checking that two runs saw
    /// the same problem.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.write_u64(self.k_true as u64);
        for v in self.dictionary.atoms().iter() {
            h.write_u64(v.to_bits());
        }
        for v in self.alpha_true.iter().chain(self.observed.iter()) {
            h.write_u64(v.to_bits());
        }
        h.0
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }
}

/// Builds an observed signal from known coefficients, additive white
/// Gaussian noise and a circular delay of `k` samples.
pub fn synthesize(
    dictionary: Dictionary,
    alpha: CoefficientVector,
    k: usize,
    sigma_noise: f64,
    seed: u64,
) -> Result<SyntheticInstance> {
    let n = dictionary.n();
    if k >= n {
        return Err(invalid(format!("shift {k} outside [0, {n})")));
    }
    if !(sigma_noise >= 0.0 && sigma_noise.is_finite()) {
        return Err(invalid(format!(
            "noise std-dev must be >= 0, got {sigma_noise}"
        )));
    }
    let clean = dictionary.apply(&alpha)?;
    let noise: Vec<f64> = if sigma_noise == 0.0 {
        vec![0.0; n]
    } else {
        let dist = Normal::new(0.0, sigma_noise).map_err(|e| invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    };
    let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
    let observed = Signal::new(circular_shift_slice(&noisy, k as i64))?;
    Ok(SyntheticInstance {
        dictionary,
        alpha_true: alpha,
        k_true: k,
        sigma_noise,
        noise,
        observed,
        seed,
        model: None,
    })
}

/// Free-function form of [`Dictionary::min_l2_solution`].
pub fn min_l2_solution(dictionary: &Dictionary, s: &Signal) -> Result<CoefficientVector> {
    dictionary.min_l2_solution(s)
}
