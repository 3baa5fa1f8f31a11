//! Expanded-dictionary baseline: decompose over every circular shift of every
//! atom with plain smoothed-ℓ0, then read the shift off the dominant block.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientVector, Dictionary};
use crate::solver::{plain_sl0, solve};
use crate::sparsity::ScheduleParams;
use crate::spectral::{circular_shift_slice, Signal};

use super::{dominant_atom, snr_db_with_cap, TrialConfig};

/// Largest expanded dictionary (in matrix entries) the baseline will build.
pub const EXPANDED_ENTRY_LIMIT: usize = 100_000_000;

pub const DEFAULT_SL0_INNER_STEPS: usize = 30;

/// The expanded problem is far more underdetermined than the joint one and
/// needs a finer final σ than the solver default.
pub const BASELINE_SCHEDULE: ScheduleParams = ScheduleParams {
    sigma_min: 1e-4,
    decay: 0.5,
};

/// `n × (n·m)` dictionary whose column `k·m + i` is atom `i` delayed by `k`.
pub fn expanded_dictionary(dictionary: &Dictionary) -> Result<Dictionary> {
    let (n, m) = (dictionary.n(), dictionary.m());
    let entries = n * n * m;
    if entries > EXPANDED_ENTRY_LIMIT {
        return Err(Error::TooLarge {
            entries,
            limit: EXPANDED_ENTRY_LIMIT,
        });
    }
    let mut columns = Vec::with_capacity(n * m);
    for k in 0..n {
        for i in 0..m {
            columns.push(circular_shift_slice(dictionary.atom(i), k as i64));
        }
    }
    Dictionary::from_columns(&columns)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    /// Coefficients over all `n·m` shifted atoms, block `k` first.
    pub expanded: CoefficientVector,
    pub atom_count: usize,
    /// Coefficient energy per shift block.
    pub block_energy: Vec<f64>,
    pub k_hat: usize,
    /// Block `k_hat` of `expanded`, as coefficients over the original atoms.
    pub alpha_hat: CoefficientVector,
}

pub fn baseline_expanded(
    dictionary: &Dictionary,
    x: &Signal,
    schedule: ScheduleParams,
    inner_steps: usize,
) -> Result<BaselineResult> {
    let (n, m) = (dictionary.n(), dictionary.m());
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "signal length",
            expected: n,
            found: x.len(),
        });
    }
    let expanded_dict = expanded_dictionary(dictionary)?;
    let expanded = plain_sl0(&expanded_dict, x, schedule, inner_steps)?;
    let block_energy: Vec<f64> = expanded
        .chunks_exact(m)
        .map(|b| b.iter().map(|v| v * v).sum())
        .collect();
    let mut k_hat = 0;
    for (k, &e) in block_energy.iter().enumerate() {
        if e > block_energy[k_hat] {
            k_hat = k;
        }
    }
    let alpha_hat = CoefficientVector::new(expanded[k_hat * m..(k_hat + 1) * m].to_vec())?;
    Ok(BaselineResult {
        atom_count: expanded.len(),
        expanded,
        block_energy,
        k_hat,
        alpha_hat,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trial: usize,
    pub seed: u64,
    pub k_true: usize,
    pub atom_true: usize,
    pub solve_k: Option<usize>,
    pub solve_atom: Option<usize>,
    pub solve_snr_db: Option<f64>,
    pub baseline_k: Option<usize>,
    pub baseline_atom: Option<usize>,
    pub baseline_snr_db: Option<f64>,
    /// Both methods picked the same (atom, integer shift).
    pub agree: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub trials: usize,
    pub agreements: usize,
    pub agreement_rate: f64,
    pub solve_correct: usize,
    pub baseline_correct: usize,
    pub expanded_atoms: usize,
    pub rows: Vec<ComparisonRow>,
}

/// Runs the joint solver and the baseline on the instances of `config`.
pub fn run_comparison(
    config: &TrialConfig,
    schedule: ScheduleParams,
    inner_steps: usize,
) -> Result<ComparisonReport> {
    config.validate()?;
    schedule.validate()?;
    if inner_steps == 0 {
        return Err(Error::InvalidParameter(
            "inner_steps must be at least 1".into(),
        ));
    }
    let rows: Vec<ComparisonRow> = (0..config.trials)
        .into_par_iter()
        .map(|t| compare_one(config, t, schedule, inner_steps))
        .collect();
    let agreements = rows.iter().filter(|r| r.agree).count();
    let correct = |k: Option<usize>, a: Option<usize>, r: &ComparisonRow| {
        k == Some(r.k_true) && a == Some(r.atom_true)
    };
    Ok(ComparisonReport {
        trials: rows.len(),
        agreements,
        agreement_rate: agreements as f64 / rows.len() as f64,
        solve_correct: rows
            .iter()
            .filter(|r| correct(r.solve_k, r.solve_atom, r))
            .count(),
        baseline_correct: rows
            .iter()
            .filter(|r| correct(r.baseline_k, r.baseline_atom, r))
            .count(),
        expanded_atoms: config.n * config.m,
        rows,
    })
}

fn compare_one(
    config: &TrialConfig,
    trial: usize,
    schedule: ScheduleParams,
    inner_steps: usize,
) -> ComparisonRow {
    let mut row = ComparisonRow {
        trial,
        seed: config.trial_seed(trial),
        k_true: 0,
        atom_true: 0,
        solve_k: None,
        solve_atom: None,
        solve_snr_db: None,
        baseline_k: None,
        baseline_atom: None,
        baseline_snr_db: None,
        agree: false,
        error: None,
    };
    let result = (|| -> Result<()> {
        let inst = config.instance(trial)?;
        let n = inst.dictionary.n();
        row.k_true = inst.k_true;
        row.atom_true = dominant_atom(&inst.alpha_true);

        let solved = solve(&inst.dictionary, &inst.observed, &config.solver)?;
        row.solve_k = Some(solved.rounded_shift(n));
        row.solve_atom = Some(dominant_atom(&solved.alpha_hat));
        row.solve_snr_db = Some(snr_db_with_cap(
            &inst.alpha_true,
            &solved.alpha_hat,
            config.snr_cap,
        )?);

        let base = baseline_expanded(&inst.dictionary, &inst.observed, schedule, inner_steps)?;
        row.baseline_k = Some(base.k_hat);
        row.baseline_atom = Some(dominant_atom(&base.alpha_hat));
        row.baseline_snr_db = Some(snr_db_with_cap(
            &inst.alpha_true,
            &base.alpha_hat,
            config.snr_cap,
        )?);

        row.agree = row.solve_k == row.baseline_k && row.solve_atom == row.baseline_atom;
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}
