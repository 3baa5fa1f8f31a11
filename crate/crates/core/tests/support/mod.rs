//! Test-only oracles and property checks shared by the `properties` and
//! `acceptance` targets. Nothing here calls the library's transform, objective
//! or linear solver; each quantity is recomputed from its definition.

#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use shiftsparse::model::{
    generate_dictionary, sample_exact_sparse, synthesize, CoefficientVector, Dictionary,
};
use shiftsparse::solver::{descent_stage, enter_stage, initialize, solve, Problem, SolverState};
use shiftsparse::sparsity::smoothed_l0;
use shiftsparse::spectral::{apply_phase_ramp, circular_shift, dft, idft, ShiftAngle, Signal};
use shiftsparse::SolverConfig;

/// Textbook DFT with the angle evaluated per bin and sample.
pub fn naive_dft(s: &[f64]) -> Vec<Complex64> {
    let n = s.len();
    (0..n)
        .map(|f| {
            s.iter()
                .enumerate()
                .map(|(t, &v)| Complex64::from_polar(v, -TAU * (f * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// `m − Σ exp(−a²/2σ²)`, without any clamping.
pub fn naive_f(alpha: &[f64], sigma: f64) -> f64 {
    alpha.len() as f64
        - alpha
            .iter()
            .map(|a| (-a * a / (2.0 * sigma * sigma)).exp())
            .sum::<f64>()
}

/// `H` from scratch: transform every atom and the signal, ramp, subtract.
pub struct NaiveObjective {
    atoms_f: Vec<Vec<Complex64>>,
    x_f: Vec<Complex64>,
}

impl NaiveObjective {
    pub fn new(dictionary: &Dictionary, x: &[f64]) -> Self {
        let atoms_f = (0..dictionary.m())
            .map(|i| naive_dft(dictionary.atom(i)))
            .collect();
        Self {
            atoms_f,
            x_f: naive_dft(x),
        }
    }

    pub fn g(&self, alpha: &[f64], theta: f64) -> f64 {
        let n = self.x_f.len();
        (0..n)
            .map(|f| {
                let model: Complex64 = self
                    .atoms_f
                    .iter()
                    .zip(alpha)
                    .map(|(col, a)| col[f] * *a)
                    .sum();
                let shifted = Complex64::from_polar(1.0, theta * f as f64) * self.x_f[f];
                (model - shifted).norm_sqr()
            })
            .sum()
    }

    pub fn h(&self, alpha: &[f64], theta: f64, lambda: f64, sigma: f64) -> f64 {
        lambda * self.g(alpha, theta) + (1.0 - lambda) * naive_f(alpha, sigma)
    }
}

/// `Φᵀ(ΦΦᵀ)⁻¹s` with an explicit inverse.
pub fn naive_min_l2(dictionary: &Dictionary, s: &[f64]) -> Vec<f64> {
    let phi = dictionary.atoms();
    let gram = phi * phi.transpose();
    let inv = gram.try_inverse().expect("invertible Gram matrix");
    let s = DMatrix::from_column_slice(s.len(), 1, s);
    (phi.transpose() * inv * s)
        .column(0)
        .iter()
        .copied()
        .collect()
}

/// Basis of the null space of `Φ` from the SVD.
pub fn null_space(dictionary: &Dictionary) -> Vec<Vec<f64>> {
    let phi = dictionary.atoms();
    let (n, m) = phi.shape();
    let full = DMatrix::from_fn(m, m, |r, c| if r < n { phi[(r, c)] } else { 0.0 });
    let svd = full.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    order[n..]
        .iter()
        .map(|&r| v_t.row(r).iter().copied().collect())
        .collect()
}

/// Brute-force initialization: argmin over integer `k` of `F` of the minimum-ℓ2
/// representation of the signal advanced by `k`. Ties go to the smallest `k`.
pub fn brute_force_scan(dictionary: &Dictionary, x: &[f64], sigma: f64) -> (usize, Vec<f64>) {
    let n = x.len();
    let scores: Vec<f64> = (0..n)
        .map(|k| {
            let advanced: Vec<f64> = (0..n).map(|i| x[(i + k) % n]).collect();
            naive_f(&naive_min_l2(dictionary, &advanced), sigma)
        })
        .collect();
    let mut best = 0;
    for k in 1..n {
        if scores[k] < scores[best] {
            best = k;
        }
    }
    (best, scores)
}

pub fn snr_oracle(truth: &[f64], estimate: &[f64]) -> f64 {
    let signal: f64 = truth.iter().map(|v| v * v).sum();
    let error: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    if error == 0.0 {
        return 300.0;
    }
    (10.0 * (signal / error).log10()).min(300.0)
}

pub fn circular_distance(a: f64, b: f64, n: usize) -> f64 {
    let n = n as f64;
    let d = (a - b).rem_euclid(n);
    d.min(n - d)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        let holds: bool = $cond;
        if !holds {
            return Err(TestCaseError::fail(format!($($fmt)*)));
        }
    };
}

pub type PropResult = Result<(), TestCaseError>;

pub fn signal_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 2..48)
}

// spectral

pub fn prop_round_trip(s: Vec<f64>) -> PropResult {
    let signal = Signal::new(s.clone()).unwrap();
    let back = idft(&dft(&signal));
    let scale = s.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (b, v) in back.iter().zip(&s) {
        ensure!(
            (b.re - v).abs() < 1e-12 * scale * s.len() as f64,
            "real part {} vs {}",
            b.re,
            v
        );
        ensure!(
            b.im.abs() < 1e-12 * scale * s.len() as f64,
            "imaginary residue {}",
            b.im
        );
    }
    Ok(())
}

pub fn prop_matches_naive_dft(s: Vec<f64>) -> PropResult {
    let fast = dft(&Signal::new(s.clone()).unwrap());
    let slow = naive_dft(&s);
    let scale = s.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    for (a, b) in fast.iter().zip(&slow) {
        ensure!((a - b).norm() < 1e-11 * scale, "{a} vs {b}");
    }
    Ok(())
}

pub fn prop_parseval(s: Vec<f64>) -> PropResult {
    let signal = Signal::new(s).unwrap();
    let lhs = dft(&signal).norm_squared();
    let rhs = signal.len() as f64 * signal.norm_squared();
    ensure!(
        (lhs - rhs).abs() <= 1e-10 * rhs.max(f64::MIN_POSITIVE),
        "{lhs} vs {rhs}"
    );
    Ok(())
}

pub fn prop_shift_theorem(s: Vec<f64>, k: i64) -> PropResult {
    let signal = Signal::new(s).unwrap();
    let n = signal.len();
    let shifted = dft(&circular_shift(&signal, k));
    let base = dft(&signal);
    let scale = base.iter().map(|b| b.norm()).fold(1.0, f64::max);
    for f in 0..n {
        let angle = -TAU * ((k.rem_euclid(n as i64) as usize * f) % n) as f64 / n as f64;
        let expected = Complex64::from_polar(1.0, angle) * base[f];
        ensure!(
            (shifted[f] - expected).norm() < 1e-10 * scale,
            "bin {f}: {} vs {expected}",
            shifted[f]
        );
    }
    Ok(())
}

pub fn prop_ramp_unitary_linear(s: Vec<f64>, u: Vec<f64>, theta: f64, c: f64) -> PropResult {
    let n = s.len().min(u.len());
    let a = dft(&Signal::new(s[..n].to_vec()).unwrap());
    let b = dft(&Signal::new(u[..n].to_vec()).unwrap());
    let t = ShiftAngle::new(theta);
    let ra = apply_phase_ramp(&a, t);
    ensure!(
        close(ra.norm_squared(), a.norm_squared(), 1e-12),
        "norm changed"
    );
    let combo: Vec<Complex64> = a.iter().zip(b.iter()).map(|(x, y)| x * c + y).collect();
    let combo = shiftsparse::Spectrum::new(combo).unwrap();
    let lhs = apply_phase_ramp(&combo, t);
    let rb = apply_phase_ramp(&b, t);
    let scale = combo.norm_squared().sqrt().max(1.0);
    for f in 0..n {
        ensure!(
            (lhs[f] - (ra[f] * c + rb[f])).norm() < 1e-12 * scale,
            "not linear at bin {f}"
        );
    }
    Ok(())
}

// sparsity

pub fn prop_f_limit(support: Vec<f64>, zeros: usize, sigma: f64) -> PropResult {
    let mut alpha = support.clone();
    alpha.extend(std::iter::repeat_n(0.0, zeros));
    let min_nonzero = support.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    prop_assume!(min_nonzero >= 10.0 * sigma);
    let f = smoothed_l0(&alpha, sigma);
    ensure!(
        (f - support.len() as f64).abs() < 1e-10,
        "F = {f}, l0 = {}",
        support.len()
    );
    Ok(())
}

pub fn prop_f_monotone(alpha: Vec<f64>, s1: f64, s2: f64) -> PropResult {
    prop_assume!(alpha.iter().any(|v| *v != 0.0));
    let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
    let (f_lo, f_hi) = (smoothed_l0(&alpha, lo), smoothed_l0(&alpha, hi));
    ensure!(f_hi <= f_lo + 1e-12, "F({hi}) = {f_hi} > F({lo}) = {f_lo}");
    ensure!(f_lo >= 0.0 && f_lo <= alpha.len() as f64, "F out of [0, m]");
    Ok(())
}

// model

pub fn prop_min_l2(
    n: usize,
    extra: usize,
    seed: u64,
    s: Vec<f64>,
    weights: Vec<f64>,
) -> PropResult {
    let m = n + extra;
    let dictionary = generate_dictionary(n, m, seed, true).unwrap();
    let s = &s[..n];
    let alpha = dictionary.min_l2_solution(s).unwrap();
    let fit = dictionary.apply(&alpha).unwrap();
    let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let resid = fit
        .iter()
        .zip(s)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    ensure!(
        resid < 1e-8 * s_norm.max(f64::MIN_POSITIVE),
        "residual {resid} for |s| {s_norm}"
    );

    let oracle = naive_min_l2(&dictionary, s);
    let scale = oracle.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (a, b) in alpha.iter().zip(&oracle) {
        ensure!((a - b).abs() < 1e-9 * scale, "{a} vs oracle {b}");
    }

    let base = alpha.norm_squared();
    let null = null_space(&dictionary);
    let mut direction = vec![0.0; m];
    for (v, w) in null.iter().zip(weights.iter().cycle()) {
        for (d, x) in direction.iter_mut().zip(v) {
            *d += w * x;
        }
    }
    let size: f64 = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    prop_assume!(size > 1e-3);
    let moved: f64 = alpha
        .iter()
        .zip(&direction)
        .map(|(a, d)| (a + d / size).powi(2))
        .sum();
    ensure!(
        moved > base,
        "null-space perturbation did not grow the norm: {moved} <= {base}"
    );
    Ok(())
}

pub fn prop_synthesize_reproducible(seed: u64, k: usize, noise: f64) -> PropResult {
    let make = || {
        let d = generate_dictionary(12, 24, seed, true).unwrap();
        let alpha = sample_exact_sparse(24, 3, 1.0, seed ^ 0x55).unwrap();
        synthesize(d, alpha, k % 12, noise, seed.wrapping_add(9)).unwrap()
    };
    let (a, b) = (make(), make());
    ensure!(
        a.observed.to_vec() == b.observed.to_vec(),
        "observed differs"
    );
    ensure!(
        a.alpha_true.to_vec() == b.alpha_true.to_vec(),
        "alpha differs"
    );
    ensure!(a.fingerprint() == b.fingerprint(), "fingerprint differs");
    // observed = shift(Φα + noise, k)
    let clean = a.dictionary.apply(&a.alpha_true).unwrap();
    let noisy: Vec<f64> = clean.iter().zip(&a.noise).map(|(c, e)| c + e).collect();
    let n = noisy.len();
    for i in 0..n {
        ensure!(
            a.observed[i] == noisy[(i + n - a.k_true) % n],
            "sample {i} not the shifted sum"
        );
    }
    Ok(())
}

pub fn prop_spectrum_parseval(seed: u64) -> PropResult {
    let d = generate_dictionary(10, 17, seed, false).unwrap();
    for i in 0..d.m() {
        let col = d.spectrum().column(i);
        let lhs: f64 = col.iter().map(|c| c.norm_sqr()).sum();
        let rhs: f64 = 10.0 * d.atom(i).iter().map(|v| v * v).sum::<f64>();
        ensure!(close(lhs, rhs, 1e-10), "atom {i}: {lhs} vs {rhs}");
    }
    Ok(())
}

// solver

pub fn prop_shift_argmin(seed: u64, k: usize) -> PropResult {
    let n = 16;
    let d = generate_dictionary(n, 32, seed, true).unwrap();
    let alpha = sample_exact_sparse(32, 3, 1.0, seed.wrapping_add(1)).unwrap();
    let inst = synthesize(d, alpha, k % n, 0.0, 0).unwrap();
    let objective = NaiveObjective::new(&inst.dictionary, &inst.observed);
    let (lambda, sigma) = (0.75, 0.1);
    let best = objective.h(
        &inst.alpha_true,
        TAU * inst.k_true as f64 / n as f64,
        lambda,
        sigma,
    );
    for g in 0..400 {
        let theta = TAU * g as f64 / 400.0;
        let h = objective.h(&inst.alpha_true, theta, lambda, sigma);
        ensure!(best <= h + 1e-9, "theta {theta}: {h} < {best}");
    }
    Ok(())
}

fn small_problem(seed: u64, k: usize) -> (Dictionary, Signal) {
    let d = generate_dictionary(12, 24, seed, true).unwrap();
    let alpha = sample_exact_sparse(24, 2, 1.0, seed.wrapping_add(3)).unwrap();
    let inst = synthesize(d, alpha, k % 12, 0.01, seed.wrapping_add(4)).unwrap();
    (inst.dictionary, inst.observed)
}

fn quick_config() -> SolverConfig {
    SolverConfig {
        inner_iterations: 15,
        ..SolverConfig::default()
    }
}

pub fn prop_k_hat_range(seed: u64, k: usize) -> PropResult {
    let (d, x) = small_problem(seed, k);
    let r = solve(&d, &x, &quick_config()).unwrap();
    let n = d.n() as f64;
    ensure!(
        (0.0..n).contains(&r.k_hat),
        "k_hat {} outside [0, {n})",
        r.k_hat
    );
    let theta = r.theta_hat.radians();
    ensure!((0.0..TAU).contains(&theta), "theta {theta} not canonical");
    ensure!(
        (r.k_hat - n * theta / TAU).abs() < 1e-12,
        "k_hat and theta disagree"
    );
    Ok(())
}

/// Re-runs the stage loop by hand and checks every stage starts exactly where
/// the previous one stopped, and that the chain reproduces `solve` bit for bit.
pub fn prop_warm_start_chain(seed: u64, k: usize) -> PropResult {
    let (d, x) = small_problem(seed, k);
    let config = quick_config();
    let problem = Problem::new(&d, &x).unwrap();
    let objective = problem.objective(config.lambda).unwrap();
    let init = initialize(&d, &x, &config).unwrap();
    let mut state = SolverState::start(
        &objective,
        init.scan.alpha0.clone(),
        init.scan.theta0,
        config.mu0,
        init.schedule.first(),
    )
    .unwrap();
    for (r, &sigma) in init.schedule.values().iter().enumerate() {
        let previous = state.clone();
        state = enter_stage(state, sigma, &config, &objective).unwrap();
        ensure!(
            state
                .alpha
                .iter()
                .zip(previous.alpha.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            "stage {r} alpha not carried over"
        );
        ensure!(
            state.theta.radians().to_bits() == previous.theta.radians().to_bits(),
            "stage {r} theta"
        );
        ensure!(state.mu.to_bits() == previous.mu.to_bits(), "stage {r} mu");
        state = descent_stage(state, config.inner_iterations, &config, &problem, r)
            .unwrap()
            .state;
    }
    let reference = solve(&d, &x, &config).unwrap();
    ensure!(
        reference.alpha_hat.to_vec() == state.alpha.to_vec(),
        "alpha differs from solve"
    );
    ensure!(
        reference.theta_hat == state.theta,
        "theta differs from solve"
    );
    Ok(())
}

pub fn prop_h_periodic(seed: u64, theta: f64, lambda: f64, sigma: f64) -> PropResult {
    let (d, x) = small_problem(seed, 5);
    let problem = Problem::new(&d, &x).unwrap();
    let objective = problem.objective(lambda).unwrap();
    let alpha = sample_exact_sparse(24, 4, 1.0, seed).unwrap();
    let h0 = objective.h(&alpha, ShiftAngle::new(theta), sigma).unwrap();
    let h1 = objective
        .h(&alpha, ShiftAngle::new(theta + TAU), sigma)
        .unwrap();
    let naive = NaiveObjective::new(&d, &x).h(&alpha, theta, lambda, sigma);
    ensure!(close(h0, h1, 1e-12), "{h0} vs {h1}");
    ensure!(close(h0, naive, 1e-10), "{h0} vs oracle {naive}");
    Ok(())
}

pub fn prop_seeded_solve_deterministic(seed: u64, k: usize) -> PropResult {
    let (d, x) = small_problem(seed, k);
    let a = solve(&d, &x, &quick_config()).unwrap();
    let b = solve(&d, &x, &quick_config()).unwrap();
    ensure!(a == b, "two runs differ");
    Ok(())
}

pub fn unit_alpha(m: usize, i: usize) -> CoefficientVector {
    CoefficientVector::basis(m, i % m)
}

fn check<S, F>(
    runner: &mut proptest::test_runner::TestRunner,
    strategy: S,
    test: F,
) -> Result<(), String>
where
    S: Strategy,
    F: Fn(S::Value) -> PropResult,
{
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Every property above, each under its own seeded runner with `cases` cases.
pub fn run_all(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
    let runner = || {
        TestRunner::new_with_rng(
            Config {
                cases,
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        )
    };
    let heavy = || {
        TestRunner::new_with_rng(
            Config {
                cases: cases.div_ceil(8).max(4),
                failure_persistence: None,
                ..Config::default()
            },
            TestRng::deterministic_rng(RngAlgorithm::ChaCha),
        )
    };
    vec![
        (
            "dft round trip",
            check(&mut runner(), signal_strategy(), prop_round_trip),
        ),
        (
            "dft matches textbook sum",
            check(&mut runner(), signal_strategy(), prop_matches_naive_dft),
        ),
        (
            "parseval",
            check(&mut runner(), signal_strategy(), prop_parseval),
        ),
        (
            "shift theorem",
            check(
                &mut runner(),
                (signal_strategy(), -100i64..100),
                |(s, k)| prop_shift_theorem(s, k),
            ),
        ),
        (
            "phase ramp unitary and linear",
            check(
                &mut runner(),
                (
                    signal_strategy(),
                    signal_strategy(),
                    -20.0f64..20.0,
                    -3.0f64..3.0,
                ),
                |(s, u, t, c)| prop_ramp_unitary_linear(s, u, t, c),
            ),
        ),
        (
            "smoothed l0 limit",
            check(
                &mut runner(),
                (
                    prop::collection::vec(prop_oneof![-50.0f64..-0.1, 0.1f64..50.0], 0..20),
                    0usize..20,
                    1e-4f64..0.01,
                ),
                |(s, z, sigma)| prop_f_limit(s, z, sigma),
            ),
        ),
        (
            "smoothed l0 monotone in sigma",
            check(
                &mut runner(),
                (
                    prop::collection::vec(-5.0f64..5.0, 1..30),
                    1e-3f64..10.0,
                    1e-3f64..10.0,
                ),
                |(a, s1, s2)| prop_f_monotone(a, s1, s2),
            ),
        ),
        (
            "min-l2 fit, oracle and null space",
            check(
                &mut runner(),
                (
                    2usize..12,
                    1usize..12,
                    any::<u64>(),
                    prop::collection::vec(-5.0f64..5.0, 12),
                    prop::collection::vec(-1.0f64..1.0, 1..6),
                ),
                |(n, e, seed, s, w)| prop_min_l2(n, e, seed, s, w),
            ),
        ),
        (
            "synthesize reproducible",
            check(
                &mut runner(),
                (any::<u64>(), 0usize..12, 0.0f64..0.5),
                |(s, k, e)| prop_synthesize_reproducible(s, k, e),
            ),
        ),
        (
            "dictionary spectrum parseval",
            check(&mut runner(), any::<u64>(), prop_spectrum_parseval),
        ),
        (
            "true shift minimizes H",
            check(&mut heavy(), (any::<u64>(), 0usize..16), |(s, k)| {
                prop_shift_argmin(s, k)
            }),
        ),
        (
            "H periodic in theta",
            check(
                &mut runner(),
                (any::<u64>(), -20.0f64..20.0, 0.05f64..0.95, 0.05f64..2.0),
                |(s, t, l, sig)| prop_h_periodic(s, t, l, sig),
            ),
        ),
        (
            "k_hat in range",
            check(&mut heavy(), (any::<u64>(), 0usize..12), |(s, k)| {
                prop_k_hat_range(s, k)
            }),
        ),
        (
            "warm-start chain",
            check(&mut heavy(), (any::<u64>(), 0usize..12), |(s, k)| {
                prop_warm_start_chain(s, k)
            }),
        ),
        (
            "seeded solve deterministic",
            check(&mut heavy(), (any::<u64>(), 0usize..12), |(s, k)| {
                prop_seeded_solve_deterministic(s, k)
            }),
        ),
    ]
}
