use std::path::PathBuf;

use clap::{Args, ValueEnum};
use shiftsparse::eval::{CoefficientPrior, TrialConfig, DEFAULT_SNR_CAP};
use shiftsparse::model::BernoulliGaussianModel;
use shiftsparse::sparsity::ScheduleParams;
use shiftsparse::SolverConfig;

/// Solver knobs. Defaults are the library's.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Weight on the data term, in (0, 1).
    #[arg(long, default_value_t = SolverConfig::default().lambda)]
    pub lambda: f64,
    /// Descent iterations per σ stage.
    #[arg(long, default_value_t = SolverConfig::default().inner_iterations)]
    pub inner_iterations: usize,
    #[arg(long, default_value_t = SolverConfig::default().mu0)]
    pub mu0: f64,
    #[arg(long, default_value_t = ScheduleParams::default().sigma_min)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = ScheduleParams::default().decay)]
    pub decay: f64,
    #[arg(long)]
    pub reset_mu_per_stage: bool,
    #[arg(long)]
    pub reject_uphill: bool,
    #[arg(long, default_value_t = SolverConfig::default().precondition_theta, action = clap::ArgAction::Set)]
    pub precondition_theta: bool,
    #[arg(long, default_value_t = SolverConfig::default().init_sigma_factor)]
    pub init_sigma_factor: f64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        SolverConfig {
            lambda: self.lambda,
            inner_iterations: self.inner_iterations,
            mu0: self.mu0,
            schedule: ScheduleParams {
                sigma_min: self.sigma_min,
                decay: self.decay,
            },
            reset_mu_per_stage: self.reset_mu_per_stage,
            reject_uphill: self.reject_uphill,
            precondition_theta: self.precondition_theta,
            init_sigma_factor: self.init_sigma_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorKind {
    /// Each entry active with probability p.
    BernoulliGaussian,
    /// Exactly `--active` entries drawn from N(0, sigma_on²).
    ExactSparse,
    /// Exactly `--active` entries equal to ±amplitude.
    SignedSparse,
}

/// Problem size, coefficient prior and noise.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 80)]
    pub m: usize,
    #[arg(long, value_enum, default_value_t = PriorKind::BernoulliGaussian)]
    pub prior: PriorKind,
    #[arg(long, default_value_t = BernoulliGaussianModel::default().p)]
    pub p: f64,
    #[arg(long, default_value_t = BernoulliGaussianModel::default().sigma_on)]
    pub sigma_on: f64,
    #[arg(long, default_value_t = BernoulliGaussianModel::default().sigma_off)]
    pub sigma_off: f64,
    /// Active count for the sparse priors.
    #[arg(long, default_value_t = 3)]
    pub active: usize,
    /// Magnitude for the signed-sparse prior.
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sigma_noise: f64,
    /// Normalize dictionary columns.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub unit_norm: bool,
}

impl ModelArgs {
    pub fn prior(&self) -> CoefficientPrior {
        match self.prior {
            PriorKind::BernoulliGaussian => {
                CoefficientPrior::BernoulliGaussian(BernoulliGaussianModel {
                    p: self.p,
                    sigma_on: self.sigma_on,
                    sigma_off: self.sigma_off,
                })
            }
            PriorKind::ExactSparse => CoefficientPrior::ExactSparse {
                active: self.active,
                sigma_on: self.sigma_on,
            },
            PriorKind::SignedSparse => CoefficientPrior::SignedSparse {
                active: self.active,
                amplitude: self.amplitude,
            },
        }
    }
}

/// Everything a Monte-Carlo run needs.
#[derive(Debug, Clone, Args)]
pub struct TrialArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Trial t uses seed `seed + t`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub success_shift_tol: f64,
    #[arg(long)]
    pub success_snr_floor: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SNR_CAP)]
    pub snr_cap: f64,
}

impl TrialArgs {
    pub fn config(&self, trials: usize) -> TrialConfig {
        TrialConfig {
            n: self.model.n,
            m: self.model.m,
            prior: self.model.prior(),
            unit_norm: self.model.unit_norm,
            sigma_noise: self.model.sigma_noise,
            solver: self.solver.config(),
            trials,
            base_seed: self.seed,
            success_shift_tol: self.success_shift_tol,
            success_snr_floor: self.success_snr_floor,
            snr_cap: self.snr_cap,
        }
    }
}

/// Options every command accepts.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, env = "SHIFTSPARSE_THREADS", default_value_t = 0)]
    pub workers: usize,
    /// Record wall times as 0 so reruns produce identical files.
    #[arg(long)]
    pub no_timing: bool,
}
