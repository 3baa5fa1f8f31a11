use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use serde_json::json;

use shiftsparse::eval::{
    lambda_sweep, parse_lambda_grid, run_comparison, run_trials, shift_error, snr_db, summarize,
    TrialConfig, TrialSummary, BASELINE_SCHEDULE, DEFAULT_SL0_INNER_STEPS,
};
use shiftsparse::io::{
    read_dictionary_csv, read_signal_csv, write_dictionary_csv, write_signal_csv, write_sweep_csv,
    write_trials_csv, InstanceRecord,
};
use shiftsparse::solver::gradcheck::{gradient_check, GradCheckConfig, GRADCHECK_TOLERANCE};
use shiftsparse::sparsity::ScheduleParams;
use shiftsparse::{solve, DecompositionResult, Dictionary, Signal};

use crate::args::{CommonArgs, ModelArgs, SolverArgs, TrialArgs};
use crate::manifest::RunManifest;

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Bad flag combination or value; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// How a successful run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ThresholdFailed,
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("shift").required(true).args(["k", "random_shift"]))]
pub struct SynthArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Circular delay in samples, in [0, n).
    #[arg(long)]
    pub k: Option<usize>,
    /// Draw the delay uniformly from the seed.
    #[arg(long)]
    pub random_shift: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<Status> {
    let config = TrialConfig {
        n: args.model.n,
        m: args.model.m,
        prior: args.model.prior(),
        unit_norm: args.model.unit_norm,
        sigma_noise: args.model.sigma_noise,
        trials: 1,
        base_seed: args.seed,
        ..TrialConfig::default()
    };
    config.validate()?;
    let inst = config.instance_with_shift(0, args.k)?;

    let mut dictionary = Vec::new();
    write_dictionary_csv(&inst.dictionary, &mut dictionary)?;
    let mut signal = Vec::new();
    write_signal_csv(&inst.observed, &mut signal)?;
    let record = InstanceRecord::from_instance(&inst);

    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start(
        "synth",
        json!({
            "n": config.n,
            "m": config.m,
            "prior": config.prior,
            "unit_norm": config.unit_norm,
            "sigma_noise": config.sigma_noise,
            "k": args.k,
            "random_shift": args.random_shift,
            "seed": args.seed,
        }),
        vec![args.seed],
    );
    manifest.emit(out, "dictionary.csv", &dictionary)?;
    manifest.emit(out, "signal.csv", &signal)?;
    manifest.emit(out, "instance.json", &json_bytes(&record)?)?;
    manifest.finish(out)?;

    say!(
        "wrote n={} m={} instance, k_true={}, {} coefficients above 0.1 in magnitude, to {}",
        config.n,
        config.m,
        inst.k_true,
        inst.alpha_true.iter().filter(|v| v.abs() > 0.1).count(),
        out.display()
    );
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["signal", "instance"]))]
pub struct DecomposeArgs {
    /// Dictionary CSV.
    #[arg(long)]
    pub dictionary: PathBuf,
    /// Signal CSV.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// Instance JSON; its ground truth is used to score the estimate.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// How many of the largest coefficients to print.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct DecomposeOutput<'a> {
    #[serde(flatten)]
    result: &'a DecompositionResult,
    k_hat_rounded: usize,
    k_true: Option<usize>,
    shift_error: Option<f64>,
    snr_db: Option<f64>,
}

pub fn decompose(args: &DecomposeArgs) -> anyhow::Result<Status> {
    let config = args.solver.config();
    config.validate()?;
    let dictionary: Dictionary = read_dictionary_csv(open(&args.dictionary)?)
        .with_context(|| format!("reading {}", args.dictionary.display()))?;
    let (signal, record): (Signal, Option<InstanceRecord>) = match (&args.signal, &args.instance) {
        (Some(path), _) => (
            read_signal_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?,
            None,
        ),
        (None, Some(path)) => {
            let record: InstanceRecord = serde_json::from_reader(open(path)?)
                .map_err(shiftsparse::Error::from)
                .with_context(|| format!("reading {}", path.display()))?;
            if record.m != dictionary.m() {
                return Err(UsageError(format!(
                    "instance has m={} but the dictionary has {} atoms",
                    record.m,
                    dictionary.m()
                ))
                .into());
            }
            (record.signal()?, Some(record))
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    if signal.len() != dictionary.n() {
        return Err(UsageError(format!(
            "signal has {} samples but the dictionary has n={}",
            signal.len(),
            dictionary.n()
        ))
        .into());
    }

    let result = solve(&dictionary, &signal, &config)?;
    let n = dictionary.n();
    let (k_true, err, snr) = match &record {
        Some(r) => {
            let truth = r.alpha_true()?;
            let snr = snr_db(&truth, &result.alpha_hat).ok();
            (
                Some(r.k_true),
                Some(shift_error(result.k_hat, r.k_true, n)),
                snr,
            )
        }
        None => (None, None, None),
    };
    let output = DecomposeOutput {
        result: &result,
        k_hat_rounded: result.rounded_shift(n),
        k_true,
        shift_error: err,
        snr_db: snr,
    };

    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start("decompose", serde_json::to_value(config)?, Vec::new());
    manifest.input(&args.dictionary);
    if let Some(p) = args.signal.as_ref().or(args.instance.as_ref()) {
        manifest.input(p);
    }
    manifest.emit(out, "result.json", &json_bytes(&output)?)?;
    manifest.finish(out)?;

    say!(
        "k_hat = {:.4} samples (theta_hat = {:.6} rad, {} stages, {} steps)",
        result.k_hat,
        result.theta_hat.radians(),
        result.stage_count,
        result.total_inner_steps
    );
    if let (Some(k), Some(e)) = (k_true, err) {
        match snr {
            Some(s) => say!("k_true = {k}, shift error {e:.4}, SNR {s:.2} dB"),
            None => say!("k_true = {k}, shift error {e:.4}"),
        }
    }
    let mut order: Vec<usize> = (0..result.alpha_hat.len()).collect();
    order.sort_by(|&a, &b| {
        result.alpha_hat[b]
            .abs()
            .total_cmp(&result.alpha_hat[a].abs())
    });
    say!("top coefficients:");
    for &i in order.iter().take(args.top) {
        say!("  atom {i:>4}  {:+.6}", result.alpha_hat[i]);
    }
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
    #[arg(long, default_value_t = TrialConfig::default().trials)]
    pub trials: usize,
    /// Exit with code 3 if the thresholds below are missed.
    #[arg(long)]
    pub assert: bool,
    #[arg(long, default_value_t = 0.95)]
    pub min_success_rate: f64,
    /// Applies to the mean SNR over successful trials.
    #[arg(long, default_value_t = 20.0)]
    pub min_mean_snr: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Serialize)]
struct BenchOutput<'a> {
    config: &'a TrialConfig,
    summary: &'a TrialSummary,
}

pub fn bench(args: &BenchArgs) -> anyhow::Result<Status> {
    let config = args.trial.config(args.trials);
    config.validate()?;
    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start(
        "bench",
        serde_json::to_value(config)?,
        vec![config.base_seed],
    );

    let mut report = run_trials(&config)?;
    if args.common.no_timing {
        for row in &mut report.rows {
            row.wall_time = 0.0;
        }
        report.summary = summarize(&report.rows);
    }
    let mut csv = Vec::new();
    write_trials_csv(&report.rows, &mut csv)?;
    manifest.emit(out, "trials.csv", &csv)?;
    let summary = &report.summary;
    manifest.emit(
        out,
        "summary.json",
        &json_bytes(&BenchOutput {
            config: &config,
            summary,
        })?,
    )?;
    manifest.finish(out)?;

    say!(
        "trials {}  successes {}  success_rate {:.4}  errored {}",
        summary.trials,
        summary.successes,
        summary.success_rate,
        summary.errored
    );
    say!(
        "mean SNR (successes) {}  mean SNR (all) {}  mean shift error {:.4}",
        fmt_db(summary.mean_snr_db_success),
        fmt_db(summary.mean_snr_db_all),
        summary.mean_shift_error
    );
    say!(
        "wall time total {:.3} s  p50 {:.4} s  p90 {:.4} s  p99 {:.4} s",
        summary.wall_time_total,
        summary.wall_time_p50,
        summary.wall_time_p90,
        summary.wall_time_p99
    );

    if args.assert {
        let rate_ok = summary.success_rate >= args.min_success_rate;
        let snr_ok = summary
            .mean_snr_db_success
            .is_some_and(|s| s >= args.min_mean_snr);
        if !(rate_ok && snr_ok) {
            eprintln!(
                "threshold failed: success_rate {:.4} (min {}), mean SNR {} (min {})",
                summary.success_rate,
                args.min_success_rate,
                fmt_db(summary.mean_snr_db_success),
                args.min_mean_snr
            );
            return Ok(Status::ThresholdFailed);
        }
        say!("thresholds met");
    }
    Ok(Status::Ok)
}

fn fmt_db(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |s| format!("{s:.2} dB"))
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
    /// `start:stop:step` (inclusive) or a comma-separated list.
    #[arg(long, default_value = "0.3:0.9:0.1")]
    pub lambdas: String,
    /// Trials per λ; every row sees the same instances.
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<Status> {
    let lambdas = parse_lambda_grid(&args.lambdas)?;
    let config = args.trial.config(args.trials);
    config.validate()?;
    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start(
        "sweep",
        json!({ "base": config, "lambdas": lambdas, "trials_per_lambda": args.trials }),
        vec![config.base_seed],
    );
    let result = lambda_sweep(&config, &lambdas, args.trials)?;
    let mut csv = Vec::new();
    write_sweep_csv(&result.rows, &mut csv)?;
    manifest.emit(out, "sweep.csv", &csv)?;
    manifest.emit(out, "sweep.json", &json_bytes(&result.rows)?)?;
    manifest.finish(out)?;

    say!(
        "{:>8} {:>8} {:>14} {:>14} {:>8}",
        "lambda",
        "trials",
        "snr_success",
        "snr_all",
        "success"
    );
    for r in &result.rows {
        say!(
            "{:>8.3} {:>8} {:>14} {:>14} {:>8.3}",
            r.lambda,
            r.trials,
            fmt_db(r.mean_snr_db_success),
            fmt_db(r.mean_snr_db_all),
            r.success_rate
        );
    }
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub trial: TrialArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Final σ of the expanded-dictionary solver.
    #[arg(long, default_value_t = BASELINE_SCHEDULE.sigma_min)]
    pub sl0_sigma_min: f64,
    #[arg(long, default_value_t = BASELINE_SCHEDULE.decay)]
    pub sl0_decay: f64,
    #[arg(long, default_value_t = DEFAULT_SL0_INNER_STEPS)]
    pub sl0_inner_steps: usize,
    /// Exit with code 3 if agreement falls below `--min-agreement`.
    #[arg(long)]
    pub assert: bool,
    #[arg(long, default_value_t = 0.9)]
    pub min_agreement: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn baseline(args: &BaselineArgs) -> anyhow::Result<Status> {
    let config = args.trial.config(args.trials);
    config.validate()?;
    let schedule = ScheduleParams {
        sigma_min: args.sl0_sigma_min,
        decay: args.sl0_decay,
    };
    schedule.validate()?;
    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start(
        "baseline",
        json!({ "trial": config, "sl0_schedule": schedule, "sl0_inner_steps": args.sl0_inner_steps }),
        vec![config.base_seed],
    );
    let report = run_comparison(&config, schedule, args.sl0_inner_steps)?;
    manifest.emit(out, "comparison.json", &json_bytes(&report)?)?;
    manifest.finish(out)?;

    say!(
        "trials {}  agreement {}/{} ({:.3})  solver correct {}  baseline correct {}  expanded atoms {}",
        report.trials,
        report.agreements,
        report.trials,
        report.agreement_rate,
        report.solve_correct,
        report.baseline_correct,
        report.expanded_atoms
    );
    if args.assert && report.agreement_rate < args.min_agreement {
        eprintln!(
            "threshold failed: agreement {:.3} (min {})",
            report.agreement_rate, args.min_agreement
        );
        return Ok(Status::ThresholdFailed);
    }
    Ok(Status::Ok)
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = GradCheckConfig::default().n)]
    pub n: usize,
    #[arg(long, default_value_t = GradCheckConfig::default().m)]
    pub m: usize,
    #[arg(long, default_value_t = GradCheckConfig::default().points)]
    pub points: usize,
    #[arg(long, default_value_t = GradCheckConfig::default().seed)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn gradcheck(args: &GradcheckArgs) -> anyhow::Result<Status> {
    let config = GradCheckConfig {
        n: args.n,
        m: args.m,
        points: args.points,
        seed: args.seed,
    };
    let report = gradient_check(&config)?;
    let out = &args.common.out;
    prepare_out(out)?;
    let mut manifest = RunManifest::start(
        "gradcheck",
        serde_json::to_value(config)?,
        vec![config.seed],
    );
    manifest.emit(out, "gradcheck.json", &json_bytes(&report)?)?;
    manifest.finish(out)?;

    say!(
        "max relative error {:.3e} (alpha {:.3e}, theta {:.3e}) over {} points, tolerance {:.0e}",
        report.max_rel_error,
        report.max_rel_error_alpha,
        report.max_rel_error_theta,
        config.points,
        GRADCHECK_TOLERANCE
    );
    if report.passed {
        Ok(Status::Ok)
    } else {
        eprintln!("gradient check failed");
        Ok(Status::ThresholdFailed)
    }
}
