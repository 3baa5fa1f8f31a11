//! File formats.
//!
//! * Dictionary CSV: first line `n,m`, then `n` rows of `m` comma-separated
//!   values (row-major).
//! * Signal CSV: first line `n`, then `n` lines of one value each.
//! * Instance JSON: [`InstanceRecord`].
//! * Per-trial CSV: `trial,seed,k_true,k_hat,shift_error,snr_db,success,wall_time`.
//! * Sweep CSV: `lambda,trials,mean_snr_db_success,mean_snr_db_all,success_rate`.
//!
//! CSV floats are written with 17 significant digits. Missing values (an
//! errored trial, an empty aggregate) are empty fields.

use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{SweepRow, TrialResult};
use crate::model::{CoefficientVector, Dictionary, SyntheticInstance};
use crate::spectral::Signal;

pub const TRIAL_CSV_HEADER: &str = "trial,seed,k_true,k_hat,shift_error,snr_db,success,wall_time";
pub const SWEEP_CSV_HEADER: &str = "lambda,trials,mean_snr_db_success,mean_snr_db_all,success_rate";

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_err(format: &'static str, message: impl Into<String>) -> Error {
    Error::Parse {
        format,
        message: message.into(),
    }
}

fn parse_f64(format: &'static str, s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(format, format!("line {line}: not a number: {:?}", s.trim())))
}

fn parse_usize(format: &'static str, s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(format, format!("bad dimension {:?}", s.trim())))
}

pub fn write_dictionary_csv<W: Write>(dictionary: &Dictionary, mut out: W) -> Result<()> {
    let (n, m) = (dictionary.n(), dictionary.m());
    writeln!(out, "{n},{m}")?;
    for row in dictionary.atoms().row_iter() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_dictionary_csv<R: BufRead>(input: R) -> Result<Dictionary> {
    const FMT: &str = "dictionary CSV";
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(FMT, "empty file"))?;
    let header = header?;
    let dims: Vec<&str> = header.split(',').collect();
    if dims.len() != 2 {
        return Err(parse_err(
            FMT,
            format!("header must be `n,m`, got {header:?}"),
        ));
    }
    let (n, m) = (parse_usize(FMT, dims[0])?, parse_usize(FMT, dims[1])?);
    let mut data = Vec::with_capacity(n * m);
    let mut rows = 0;
    for (idx, line) in lines {
        let line = line?;
        let values = line
            .split(',')
            .map(|s| parse_f64(FMT, s, idx + 1))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != m {
            return Err(parse_err(
                FMT,
                format!(
                    "line {}: expected {m} values, found {}",
                    idx + 1,
                    values.len()
                ),
            ));
        }
        data.extend(values);
        rows += 1;
    }
    if rows != n {
        return Err(parse_err(FMT, format!("expected {n} rows, found {rows}")));
    }
    Dictionary::from_row_major(n, m, &data)
}

pub fn write_signal_csv<W: Write>(signal: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "{}", signal.len())?;
    for v in signal {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_signal_csv<R: BufRead>(input: R) -> Result<Signal> {
    const FMT: &str = "signal CSV";
    let mut lines = input
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| parse_err(FMT, "empty file"))?;
    let n = parse_usize(FMT, &header?)?;
    let values = lines
        .map(|(idx, l)| parse_f64(FMT, &l?, idx + 1))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != n {
        return Err(parse_err(
            FMT,
            format!("expected {n} samples, found {}", values.len()),
        ));
    }
    Signal::new(values)
}

/// JSON form of a [`SyntheticInstance`] (the dictionary itself lives in its
/// own CSV file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub p: Option<f64>,
    pub sigma_on: Option<f64>,
    pub sigma_off: Option<f64>,
    pub sigma_noise: f64,
    pub k_true: usize,
    pub alpha_true: Vec<f64>,
    pub observed: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<f64>,
}

impl InstanceRecord {
    pub fn from_instance(inst: &SyntheticInstance) -> Self {
        Self {
            n: inst.dictionary.n(),
            m: inst.dictionary.m(),
            seed: inst.seed,
            p: inst.model.map(|m| m.p),
            sigma_on: inst.model.map(|m| m.sigma_on),
            sigma_off: inst.model.map(|m| m.sigma_off),
            sigma_noise: inst.sigma_noise,
            k_true: inst.k_true,
            alpha_true: inst.alpha_true.to_vec(),
            observed: inst.observed.to_vec(),
            noise: inst.noise.clone(),
        }
    }

    pub fn signal(&self) -> Result<Signal> {
        if self.observed.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "instance observed length",
                expected: self.n,
                found: self.observed.len(),
            });
        }
        Signal::new(self.observed.clone())
    }

    pub fn alpha_true(&self) -> Result<CoefficientVector> {
        if self.alpha_true.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "instance coefficient count",
                expected: self.m,
                found: self.alpha_true.len(),
            });
        }
        CoefficientVector::new(self.alpha_true.clone())
    }
}

pub fn write_trials_csv<W: Write>(rows: &[TrialResult], mut out: W) -> Result<()> {
    writeln!(out, "{TRIAL_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.k_true,
            fmt_opt(r.k_hat),
            fmt_f64(r.shift_error),
            fmt_opt(r.snr_db),
            r.success,
            fmt_f64(r.wall_time)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.lambda),
            r.trials,
            fmt_opt(r.mean_snr_db_success),
            fmt_opt(r.mean_snr_db_all),
            fmt_f64(r.success_rate)
        )?;
    }
    Ok(())
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| {
        Error::Io(std::io::Error::other(format!(
            "not a file path: {}",
            path.display()
        )))
    })?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
