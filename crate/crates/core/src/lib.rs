//! Sparse decomposition of a circularly shifted signal.
//!
//! Given a signal `x` and an overcomplete dictionary `Φ`, estimate a delay `k`
//! and a sparse coefficient vector `α` such that `x` advanced by `k` samples
//! is approximately `Φα`. The shift is handled in the frequency domain as a
//! continuous phase ramp, sparsity with a smoothed ℓ0 surrogate, and local
//! minima with a decreasing smoothing schedule.
//!
//! ```no_run
//! use shiftsparse::{model, solver};
//!
//! let dictionary = model::generate_dictionary(40, 80, 7, true).unwrap();
//! let alpha = model::sample_coefficients(&Default::default(), 80, 8).unwrap();
//! let instance = model::synthesize(dictionary, alpha, 13, 0.01, 9).unwrap();
//! let result = solver::solve(&instance.dictionary, &instance.observed, &Default::default()).unwrap();
//! println!("shift ≈ {:.2} samples", result.k_hat);
//! ```

pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod solver;
pub mod sparsity;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{CoefficientVector, Dictionary, SyntheticInstance};
pub use solver::{solve, DecompositionResult, SolverConfig};
pub use spectral::{ShiftAngle, Signal, Spectrum};
