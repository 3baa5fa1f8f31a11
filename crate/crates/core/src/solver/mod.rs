//! Joint shift and sparse-coefficient estimation.
//!
//! The solver minimizes `H(α, θ)` (see [`objective`]) with graduated
//! non-convexity: a decreasing σ schedule, each stage warm-started from the
//! previous one and run for a fixed number of adaptive steepest-descent
//! steps. The starting point comes from scanning all integer shifts for the
//! sparsest minimum-ℓ2 representation.
//!
//! Step-size rule per iteration: take the trial step `(α − μ∇α, θ − μ·c·∇θ)`;
//! if it strictly lowers `H` multiply `μ` by 1.2, otherwise by 0.5. The step
//! is committed either way unless `reject_uphill` is set.
//!
//! `c` is 1 for the literal update. With `precondition_theta` (the default) it
//! is `Σ|X_f|² / Σf²|X_f|²`, which rescales the shift coordinate so its
//! curvature is comparable to the coefficient directions. Without it the
//! shared `μ` is throttled by the shift direction and the coefficients barely
//! move.

pub mod gradcheck;
pub mod objective;
mod sl0;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{CoefficientVector, Dictionary};
use crate::sparsity::{make_schedule, smoothed_l0, ScheduleParams, SigmaSchedule};
use crate::spectral::{circular_shift, dft, ShiftAngle, Signal, Spectrum};

pub use objective::{
    grad_alpha, grad_theta, objective_g, objective_h, residual, Evaluation, Gradients, Objective,
};
pub use sl0::{plain_sl0, SL0_STEP};

const GROW: f64 = 1.2;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Weight on the data term, in (0, 1).
    pub lambda: f64,
    /// Descent iterations per σ stage.
    pub inner_iterations: usize,
    pub mu0: f64,
    pub schedule: ScheduleParams,
    pub reset_mu_per_stage: bool,
    pub reject_uphill: bool,
    pub precondition_theta: bool,
    /// The initial shift scan scores candidates at this fraction of the
    /// provisional first σ.
    pub init_sigma_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.75,
            inner_iterations: 100,
            mu0: 0.05,
            schedule: ScheduleParams::default(),
            reset_mu_per_stage: false,
            reject_uphill: false,
            precondition_theta: true,
            init_sigma_factor: 0.25,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(invalid(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if self.inner_iterations == 0 {
            return Err(invalid("inner_iterations must be at least 1"));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(invalid(format!("mu0 must be positive, got {}", self.mu0)));
        }
        if !(self.init_sigma_factor > 0.0 && self.init_sigma_factor.is_finite()) {
            return Err(invalid(format!(
                "init_sigma_factor must be positive, got {}",
                self.init_sigma_factor
            )));
        }
        self.schedule.validate()
    }
}

/// A dictionary paired with an observed signal and its spectrum.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    dictionary: &'a Dictionary,
    signal: &'a Signal,
    spectrum: Spectrum,
    theta_scale: f64,
}

impl<'a> Problem<'a> {
    pub fn new(dictionary: &'a Dictionary, signal: &'a Signal) -> Result<Self> {
        if signal.len() != dictionary.n() {
            return Err(Error::DimensionMismatch {
                what: "signal length",
                expected: dictionary.n(),
                found: signal.len(),
            });
        }
        let spectrum = dft(signal);
        let (power, weighted) = spectrum
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(p, w), (f, b)| {
                let e = b.norm_sqr();
                (p + e, w + (f * f) as f64 * e)
            });
        let theta_scale = if weighted > 0.0 {
            power / weighted
        } else {
            1.0
        };
        Ok(Self {
            dictionary,
            signal,
            spectrum,
            theta_scale,
        })
    }

    pub fn dictionary(&self) -> &Dictionary {
        self.dictionary
    }

    pub fn signal(&self) -> &Signal {
        self.signal
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// `Σ|X_f|² / Σf²|X_f|²`, or 1 when the signal has no non-DC content.
    pub fn theta_preconditioner(&self) -> f64 {
        self.theta_scale
    }

    pub fn objective(&self, lambda: f64) -> Result<Objective<'_>> {
        Objective::new(self.dictionary.spectrum(), &self.spectrum, lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub alpha: CoefficientVector,
    pub theta: ShiftAngle,
    pub mu: f64,
    pub sigma: f64,
    pub h_value: f64,
}

impl SolverState {
    /// Starts a state at `(alpha, theta)` and evaluates `H` there.
    pub fn start(
        objective: &Objective<'_>,
        alpha: CoefficientVector,
        theta: ShiftAngle,
        mu: f64,
        sigma: f64,
    ) -> Result<Self> {
        let h_value = objective.h(&alpha, theta, sigma)?;
        Ok(Self {
            alpha,
            theta,
            mu,
            sigma,
            h_value,
        })
    }
}

/// Summary of one σ stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub sigma: f64,
    pub h: f64,
    pub g: f64,
    pub f: f64,
    /// Step size at the end of the stage.
    pub mu: f64,
    pub iterations: usize,
    /// Iterations whose trial step strictly lowered `H`.
    pub improving_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub state: SolverState,
    pub trace: StageTrace,
}

/// Runs exactly `iterations` adaptive steepest-descent steps at the state's σ.
///
/// `stage` only labels divergence errors.
pub fn descent_stage(
    state: SolverState,
    iterations: usize,
    config: &SolverConfig,
    problem: &Problem<'_>,
    stage: usize,
) -> Result<StageOutcome> {
    let objective = problem.objective(config.lambda)?;
    let theta_scale = if config.precondition_theta {
        problem.theta_preconditioner()
    } else {
        1.0
    };
    let SolverState {
        alpha,
        mut theta,
        mut mu,
        sigma,
        mut h_value,
    } = state;
    let mut alpha = alpha.into_inner();
    let mut improving = 0;
    let mut trial = vec![0.0; alpha.len()];

    for iteration in 0..iterations {
        let grads = objective.gradients(&alpha, theta, sigma)?;
        if !grads.at.h.is_finite() {
            return Err(Error::Diverged {
                stage,
                iteration,
                quantity: "objective",
            });
        }
        if !grads.theta.is_finite() || grads.alpha.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                stage,
                iteration,
                quantity: "gradient",
            });
        }
        h_value = grads.at.h;

        for ((t, a), g) in trial.iter_mut().zip(&alpha).zip(&grads.alpha) {
            *t = a - mu * g;
        }
        let trial_theta = ShiftAngle::new(theta.radians() - mu * theta_scale * grads.theta);
        let trial_h = objective.h(&trial, trial_theta, sigma)?;
        if !trial_h.is_finite() {
            return Err(Error::Diverged {
                stage,
                iteration,
                quantity: "objective",
            });
        }

        let downhill = trial_h < h_value;
        if downhill || !config.reject_uphill {
            std::mem::swap(&mut alpha, &mut trial);
            theta = trial_theta;
            h_value = trial_h;
        }
        if downhill {
            improving += 1;
            mu *= GROW;
        } else {
            mu *= SHRINK;
        }
    }

    let eval = objective.evaluate(&alpha, theta, sigma)?;
    Ok(StageOutcome {
        state: SolverState {
            alpha: CoefficientVector::new(alpha)?,
            theta,
            mu,
            sigma,
            h_value,
        },
        trace: StageTrace {
            sigma,
            h: eval.h,
            g: eval.g,
            f: eval.f,
            mu,
            iterations,
            improving_steps: improving,
        },
    })
}

/// Result of scanning integer shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct InitScan {
    pub k0: usize,
    pub alpha0: CoefficientVector,
    pub theta0: ShiftAngle,
    pub sigma: f64,
    /// `F(α(k))` for every candidate `k`.
    pub scores: Vec<f64>,
}

/// For each `k`, un-shifts the signal by `k` samples, takes its minimum-ℓ2
/// representation and scores it with `F` at `sigma`. Returns the best
/// candidate; ties go to the smallest `k`.
pub fn init_scan(dictionary: &Dictionary, x: &Signal, sigma: f64) -> Result<InitScan> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("scan sigma must be positive, got {sigma}")));
    }
    let n = dictionary.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "signal length",
            expected: n,
            found: x.len(),
        });
    }
    let mut best: Option<(usize, CoefficientVector, f64)> = None;
    let mut scores = Vec::with_capacity(n);
    for k in 0..n {
        let candidate = dictionary.min_l2_solution(&circular_shift(x, -(k as i64)))?;
        let score = smoothed_l0(&candidate, sigma);
        scores.push(score);
        if best.as_ref().is_none_or(|(_, _, b)| score < *b) {
            best = Some((k, candidate, score));
        }
    }
    let (k0, alpha0, _) = best.expect("n >= 2 candidates");
    Ok(InitScan {
        k0,
        alpha0,
        theta0: ShiftAngle::from_samples(k0 as f64, n),
        sigma,
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub alpha_hat: CoefficientVector,
    pub theta_hat: ShiftAngle,
    /// Estimated delay in samples, `n·θ̂/2π ∈ [0, n)`.
    pub k_hat: f64,
    /// Shift picked by the initial scan.
    pub k0: usize,
    pub init_sigma: f64,
    /// Objective at the starting point under the first σ.
    pub initial: Evaluation,
    pub trace: Vec<StageTrace>,
    pub stage_count: usize,
    pub total_inner_steps: usize,
}

impl DecompositionResult {
    /// Integer shift nearest to `k_hat`, modulo `n`.
    pub fn rounded_shift(&self, n: usize) -> usize {
        (self.k_hat.round() as usize) % n
    }
}

/// Scan plus schedule: everything `solve` decides before descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub scan: InitScan,
    pub schedule: SigmaSchedule,
}

/// Picks the scan σ from the unshifted min-ℓ2 candidate, scans all shifts
/// and builds the σ schedule from the winning candidate.
pub fn initialize(
    dictionary: &Dictionary,
    x: &Signal,
    config: &SolverConfig,
) -> Result<Initialization> {
    config.validate()?;
    let params = config.schedule;
    let provisional = dictionary.min_l2_solution(x)?;
    let sigma_init =
        (config.init_sigma_factor * params.initial_sigma(&provisional)).max(params.sigma_min);
    let scan = init_scan(dictionary, x, sigma_init)?;
    let schedule = make_schedule(&scan.alpha0, params.sigma_min, params.decay)?;
    Ok(Initialization { scan, schedule })
}

/// Estimates `(α̂, θ̂)` such that advancing `x` by `n·θ̂/2π` samples is
/// approximately `Φ·α̂` with `α̂` sparse.
pub fn solve(
    dictionary: &Dictionary,
    x: &Signal,
    config: &SolverConfig,
) -> Result<DecompositionResult> {
    config.validate()?;
    let problem = Problem::new(dictionary, x)?;
    let objective = problem.objective(config.lambda)?;
    let m = dictionary.m();

    if x.is_zero() {
        let sigma = config.schedule.sigma_min;
        let zero = Evaluation {
            h: 0.0,
            g: 0.0,
            f: 0.0,
        };
        return Ok(DecompositionResult {
            alpha_hat: CoefficientVector::zeros(m),
            theta_hat: ShiftAngle::new(0.0),
            k_hat: 0.0,
            k0: 0,
            init_sigma: sigma,
            initial: zero,
            trace: vec![StageTrace {
                sigma,
                h: 0.0,
                g: 0.0,
                f: 0.0,
                mu: config.mu0,
                iterations: 0,
                improving_steps: 0,
            }],
            stage_count: 1,
            total_inner_steps: 0,
        });
    }

    let Initialization { scan, schedule } = initialize(dictionary, x, config)?;
    let initial = objective.evaluate(&scan.alpha0, scan.theta0, schedule.first())?;
    let mut state = SolverState::start(
        &objective,
        scan.alpha0.clone(),
        scan.theta0,
        config.mu0,
        schedule.first(),
    )?;
    let mut trace = Vec::with_capacity(schedule.len());
    for (r, &sigma) in schedule.values().iter().enumerate() {
        state = enter_stage(state, sigma, config, &objective)?;
        let outcome = descent_stage(state, config.inner_iterations, config, &problem, r)?;
        trace.push(outcome.trace);
        state = outcome.state;
    }

    let n = dictionary.n();
    Ok(DecompositionResult {
        k_hat: state.theta.shift_samples(n),
        theta_hat: state.theta,
        alpha_hat: state.alpha,
        k0: scan.k0,
        init_sigma: scan.sigma,
        initial,
        stage_count: trace.len(),
        total_inner_steps: trace.iter().map(|t| t.iterations).sum(),
        trace,
    })
}

/// Carries the previous stage's `(α, θ, μ)` into a new σ level.
pub fn enter_stage(
    state: SolverState,
    sigma: f64,
    config: &SolverConfig,
    objective: &Objective<'_>,
) -> Result<SolverState> {
    let mu = if config.reset_mu_per_stage {
        config.mu0
    } else {
        state.mu
    };
    SolverState::start(objective, state.alpha, state.theta, mu, sigma)
}
