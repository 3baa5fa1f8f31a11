//! Monte-Carlo evaluation: SNR metric, success criteria, trial runner and
//! λ sweep.
//!
//! Trial `t` is keyed to seed `base_seed + t`; everything random in that
//! trial (dictionary, coefficients, shift, noise) derives from it, so serial
//! and parallel runs produce the same rows.

mod baseline;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{
    derive_seed, generate_dictionary, sample_coefficients, sample_exact_sparse,
    sample_signed_sparse, synthesize, BernoulliGaussianModel, CoefficientVector, SyntheticInstance,
};
use crate::solver::{solve, SolverConfig};

pub use baseline::{
    baseline_expanded, expanded_dictionary, run_comparison, BaselineResult, ComparisonReport,
    ComparisonRow, BASELINE_SCHEDULE, DEFAULT_SL0_INNER_STEPS, EXPANDED_ENTRY_LIMIT,
};

/// SNR reported when the estimate is exact.
pub const DEFAULT_SNR_CAP: f64 = 300.0;

/// `10·log₁₀(‖α‖² / ‖α̂ − α‖²)`, capped at `cap`.
pub fn snr_db_with_cap(alpha_true: &[f64], alpha_hat: &[f64], cap: f64) -> Result<f64> {
    if alpha_true.len() != alpha_hat.len() {
        return Err(Error::DimensionMismatch {
            what: "coefficient count",
            expected: alpha_true.len(),
            found: alpha_hat.len(),
        });
    }
    let signal: f64 = alpha_true.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let error: f64 = alpha_true
        .iter()
        .zip(alpha_hat)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    if error == 0.0 {
        return Ok(cap);
    }
    Ok((10.0 * (signal / error).log10()).min(cap))
}

pub fn snr_db(alpha_true: &[f64], alpha_hat: &[f64]) -> Result<f64> {
    snr_db_with_cap(alpha_true, alpha_hat, DEFAULT_SNR_CAP)
}

/// Circular distance between an estimated and a true shift, in `[0, n/2]`.
pub fn shift_error(k_hat: f64, k_true: usize, n: usize) -> f64 {
    let n = n as f64;
    let d = (k_hat - k_true as f64).rem_euclid(n);
    d.min(n - d)
}

/// Where trial coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientPrior {
    BernoulliGaussian(BernoulliGaussianModel),
    /// Exactly `active` entries drawn from `N(0, sigma_on²)`, the rest zero.
    ExactSparse {
        active: usize,
        sigma_on: f64,
    },
    /// Exactly `active` entries of magnitude `amplitude`, random signs.
    SignedSparse {
        active: usize,
        amplitude: f64,
    },
}

impl Default for CoefficientPrior {
    fn default() -> Self {
        Self::BernoulliGaussian(BernoulliGaussianModel::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub n: usize,
    pub m: usize,
    pub prior: CoefficientPrior,
    pub unit_norm: bool,
    pub sigma_noise: f64,
    pub solver: SolverConfig,
    pub trials: usize,
    pub base_seed: u64,
    /// Success needs a circular shift error at most this many samples.
    pub success_shift_tol: f64,
    /// Optional extra success requirement on the SNR.
    pub success_snr_floor: Option<f64>,
    pub snr_cap: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            n: 40,
            m: 80,
            prior: CoefficientPrior::default(),
            unit_norm: true,
            sigma_noise: 0.01,
            solver: SolverConfig::default(),
            trials: 1000,
            base_seed: 0,
            success_shift_tol: 0.5,
            success_snr_floor: None,
            snr_cap: DEFAULT_SNR_CAP,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m < self.n {
            return Err(invalid(format!(
                "need m >= n >= 2, got n={}, m={}",
                self.n, self.m
            )));
        }
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let half = self.n as f64 / 2.0;
        if !(self.success_shift_tol > 0.0 && self.success_shift_tol < half) {
            return Err(invalid(format!(
                "success_shift_tol must lie in (0, {half}), got {}",
                self.success_shift_tol
            )));
        }
        if !(self.sigma_noise >= 0.0 && self.sigma_noise.is_finite()) {
            return Err(invalid(format!(
                "sigma_noise must be >= 0, got {}",
                self.sigma_noise
            )));
        }
        match self.prior {
            CoefficientPrior::BernoulliGaussian(model) => model.validate()?,
            CoefficientPrior::SignedSparse { active, amplitude } => {
                if active == 0 || active > self.m {
                    return Err(invalid(format!(
                        "active count {active} outside [1, {}]",
                        self.m
                    )));
                }
                if !(amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(invalid(format!(
                        "amplitude must be positive, got {amplitude}"
                    )));
                }
            }
            CoefficientPrior::ExactSparse { active, sigma_on } => {
                if active == 0 || active > self.m {
                    return Err(invalid(format!(
                        "active count {active} outside [1, {}]",
                        self.m
                    )));
                }
                if !(sigma_on > 0.0 && sigma_on.is_finite()) {
                    return Err(invalid(format!(
                        "sigma_on must be positive, got {sigma_on}"
                    )));
                }
            }
        }
        self.solver.validate()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    /// Regenerates the problem instance of trial `trial`.
    pub fn instance(&self, trial: usize) -> Result<SyntheticInstance> {
        self.instance_with_shift(trial, None)
    }

    /// Like [`TrialConfig::instance`], but with the shift pinned to `k` when
    /// given. Dictionary, coefficients and noise are unchanged.
    pub fn instance_with_shift(&self, trial: usize, k: Option<usize>) -> Result<SyntheticInstance> {
        let seed = self.trial_seed(trial);
        let dictionary = generate_dictionary(self.n, self.m, derive_seed(seed, 1), self.unit_norm)?;
        let (alpha, model) = match self.prior {
            CoefficientPrior::BernoulliGaussian(model) => (
                sample_coefficients(&model, self.m, derive_seed(seed, 2))?,
                Some(model),
            ),
            CoefficientPrior::ExactSparse { active, sigma_on } => (
                sample_exact_sparse(self.m, active, sigma_on, derive_seed(seed, 2))?,
                None,
            ),
            CoefficientPrior::SignedSparse { active, amplitude } => (
                sample_signed_sparse(self.m, active, amplitude, derive_seed(seed, 2))?,
                None,
            ),
        };
        let k = match k {
            Some(k) => k,
            None => ChaCha8Rng::seed_from_u64(derive_seed(seed, 3)).random_range(0..self.n),
        };
        let mut instance =
            synthesize(dictionary, alpha, k, self.sigma_noise, derive_seed(seed, 4))?;
        instance.seed = seed;
        instance.model = model;
        Ok(instance)
    }

    pub fn is_success(&self, shift_error: f64, snr_db: f64) -> bool {
        shift_error <= self.success_shift_tol
            && self.success_snr_floor.is_none_or(|floor| snr_db >= floor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub k_true: usize,
    /// `None` when the trial errored.
    pub k_hat: Option<f64>,
    pub shift_error: f64,
    pub snr_db: Option<f64>,
    pub success: bool,
    pub wall_time: f64,
    pub stage_count: usize,
    pub total_inner_steps: usize,
    pub final_h: Option<f64>,
    pub instance_hash: u64,
    pub error: Option<String>,
}

impl TrialResult {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_time: 0.0,
            ..self.clone()
        } == Self {
            wall_time: 0.0,
            ..other.clone()
        }
    }
}

fn evaluate_instance(
    config: &TrialConfig,
    trial: usize,
    instance: &SyntheticInstance,
) -> TrialResult {
    let started = Instant::now();
    let outcome = solve(&instance.dictionary, &instance.observed, &config.solver).and_then(|r| {
        let snr = snr_db_with_cap(&instance.alpha_true, &r.alpha_hat, config.snr_cap)?;
        Ok((r, snr))
    });
    let wall_time = started.elapsed().as_secs_f64();
    let n = config.n;
    match outcome {
        Ok((result, snr)) => {
            let err = shift_error(result.k_hat, instance.k_true, n);
            TrialResult {
                trial,
                seed: instance.seed,
                k_true: instance.k_true,
                k_hat: Some(result.k_hat),
                shift_error: err,
                snr_db: Some(snr),
                success: config.is_success(err, snr),
                wall_time,
                stage_count: result.stage_count,
                total_inner_steps: result.total_inner_steps,
                final_h: result.trace.last().map(|t| t.h),
                instance_hash: instance.fingerprint(),
                error: None,
            }
        }
        Err(e) => TrialResult {
            trial,
            seed: instance.seed,
            k_true: instance.k_true,
            k_hat: None,
            shift_error: n as f64 / 2.0,
            snr_db: None,
            success: false,
            wall_time,
            stage_count: 0,
            total_inner_steps: 0,
            final_h: None,
            instance_hash: instance.fingerprint(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs one trial. Errors are recorded in the result, not returned.
pub fn run_trial(config: &TrialConfig, trial: usize) -> TrialResult {
    match config.instance(trial) {
        Ok(instance) => evaluate_instance(config, trial, &instance),
        Err(e) => TrialResult {
            trial,
            seed: config.trial_seed(trial),
            k_true: 0,
            k_hat: None,
            shift_error: config.n as f64 / 2.0,
            snr_db: None,
            success: false,
            wall_time: 0.0,
            stage_count: 0,
            total_inner_steps: 0,
            final_h: None,
            instance_hash: 0,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub successes: usize,
    pub errored: usize,
    pub success_rate: f64,
    pub mean_snr_db_success: Option<f64>,
    pub mean_snr_db_all: Option<f64>,
    pub mean_shift_error: f64,
    pub wall_time_total: f64,
    pub wall_time_p50: f64,
    pub wall_time_p90: f64,
    pub wall_time_p99: f64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Aggregates per-trial rows. Pure: depends only on `rows`.
pub fn summarize(rows: &[TrialResult]) -> TrialSummary {
    let trials = rows.len();
    let successes = rows.iter().filter(|r| r.success).count();
    let mut times: Vec<f64> = rows.iter().map(|r| r.wall_time).collect();
    times.sort_by(f64::total_cmp);
    TrialSummary {
        trials,
        successes,
        errored: rows.iter().filter(|r| r.error.is_some()).count(),
        success_rate: if trials == 0 {
            0.0
        } else {
            successes as f64 / trials as f64
        },
        mean_snr_db_success: mean(rows.iter().filter(|r| r.success).filter_map(|r| r.snr_db)),
        mean_snr_db_all: mean(rows.iter().filter_map(|r| r.snr_db)),
        mean_shift_error: mean(rows.iter().map(|r| r.shift_error)).unwrap_or(0.0),
        wall_time_total: times.iter().sum(),
        wall_time_p50: percentile(&times, 0.5),
        wall_time_p90: percentile(&times, 0.9),
        wall_time_p99: percentile(&times, 0.99),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub summary: TrialSummary,
    pub rows: Vec<TrialResult>,
}

/// Runs `config.trials` independent trials on the current rayon pool.
pub fn run_trials(config: &TrialConfig) -> Result<TrialReport> {
    config.validate()?;
    let rows: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect();
    Ok(TrialReport {
        summary: summarize(&rows),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub trials: usize,
    pub mean_snr_db_success: Option<f64>,
    pub mean_snr_db_all: Option<f64>,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-λ trial reports, aligned with `rows`.
    pub reports: Vec<TrialReport>,
}

/// Runs the same `trials_per_lambda` instances for every `λ`. Rows come out in
/// increasing `λ`.
pub fn lambda_sweep(
    base: &TrialConfig,
    lambdas: &[f64],
    trials_per_lambda: usize,
) -> Result<SweepResult> {
    if lambdas.is_empty() {
        return Err(invalid("lambda sweep needs at least one lambda"));
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(bad) = sorted.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(invalid(format!("lambda {bad} outside (0, 1)")));
    }
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("duplicate lambda in sweep"));
    }
    let mut rows = Vec::with_capacity(sorted.len());
    let mut reports = Vec::with_capacity(sorted.len());
    for &lambda in &sorted {
        let config = TrialConfig {
            trials: trials_per_lambda,
            solver: SolverConfig {
                lambda,
                ..base.solver
            },
            ..*base
        };
        let report = run_trials(&config)?;
        rows.push(SweepRow {
            lambda,
            trials: report.summary.trials,
            mean_snr_db_success: report.summary.mean_snr_db_success,
            mean_snr_db_all: report.summary.mean_snr_db_all,
            success_rate: report.summary.success_rate,
        });
        reports.push(report);
    }
    Ok(SweepResult { rows, reports })
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid(format!("bad number {s:?} in lambda grid")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!(
                "range must be start:stop:step, got {spec:?}"
            )));
        }
        let (start, stop, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(invalid(format!("empty or invalid range {spec:?}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round away accumulated binary error: 0.3 + 4·0.1 prints as 0.7
        Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        spec.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse)
            .collect()
    }
}

/// Index of the largest-magnitude coefficient.
pub fn dominant_atom(alpha: &CoefficientVector) -> usize {
    alpha.argmax_abs().unwrap_or(0)
}
