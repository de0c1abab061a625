//! Accuracy, multi-seed aggregation, and the paired bootstrap significance
//! test.
//!
//! Aggregation uses the population standard deviation (divide by N).
//! The significance test is paired and one-sided: resample example indices
//! with replacement and report the fraction of resamples in which system `a`
//! fails to beat system `b`, given that `a` beats `b` on the full set;
//! otherwise the p-value is 1. Each resample draws from its own stream
//! derived from `(seed, resample_index)`, so the mapping is deterministic
//! and safe to parallelize.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{tags, Rng};

/// Fraction of exact matches between predictions and gold labels.
pub fn accuracy(predicted: &[usize], gold: &[usize]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::Misaligned(format!(
            "{} predictions vs {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidData("cannot score an empty prediction list".into()));
    }
    let hits = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Arithmetic mean and population standard deviation.
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidData("cannot aggregate an empty list".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Default resample count for [`paired_bootstrap_test`].
pub const DEFAULT_RESAMPLES: usize = 10_000;

/// One-sided paired bootstrap test of "system `a` beats system `b`".
///
/// Returns 1.0 outright when `a` does not beat `b` on the full set; otherwise
/// the fraction of `resamples` index resamples (with replacement) on which
/// `accuracy(a) - accuracy(b) <= 0`. Deterministic under `seed`; resample
/// `r` draws from the stream `(seed, RESAMPLE, r)`.
pub fn paired_bootstrap_test(
    preds_a: &[usize],
    preds_b: &[usize],
    gold: &[usize],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    let n = gold.len();
    if preds_a.len() != n || preds_b.len() != n {
        return Err(Error::Misaligned(format!(
            "prediction lengths {} and {} vs {} gold labels",
            preds_a.len(),
            preds_b.len(),
            n
        )));
    }
    if n == 0 {
        return Err(Error::InvalidData("cannot test empty prediction lists".into()));
    }
    if resamples == 0 {
        return Err(Error::InvalidData("resamples must be at least 1".into()));
    }

    // Per-example advantage of a over b: +1, 0, or -1.
    let diffs: Vec<i64> = (0..n)
        .map(|i| (preds_a[i] == gold[i]) as i64 - (preds_b[i] == gold[i]) as i64)
        .collect();
    if diffs.iter().sum::<i64>() <= 0 {
        return Ok(1.0);
    }

    let mut not_better = 0usize;
    for r in 0..resamples {
        let mut rng = Rng::from_stream(seed, &[tags::RESAMPLE, r as u64]);
        let sum: i64 = (0..n).map(|_| diffs[rng.index(n)]).sum();
        if sum <= 0 {
            not_better += 1;
        }
    }
    Ok(not_better as f64 / resamples as f64)
}

/// Aggregated multi-seed result of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub strategy: String,
    pub seeds: Vec<u64>,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Mean count of pseudo-labels added per run.
    pub mu_pseudo: f64,
    pub p_value_vs_baseline: Option<f64>,
}

impl RunReport {
    pub fn new(
        strategy: impl Into<String>,
        seeds: Vec<u64>,
        per_seed_accuracy: Vec<f64>,
        mu_pseudo: f64,
    ) -> Result<Self> {
        if seeds.len() != per_seed_accuracy.len() {
            return Err(Error::Misaligned(format!(
                "{} seeds vs {} accuracies",
                seeds.len(),
                per_seed_accuracy.len()
            )));
        }
        let (mean, std) = aggregate(&per_seed_accuracy)?;
        Ok(RunReport {
            strategy: strategy.into(),
            seeds,
            per_seed_accuracy,
            mean,
            std,
            mu_pseudo,
            p_value_vs_baseline: None,
        })
    }
}

fn round6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float reparses")
}

/// Persist a report as line-delimited records with accuracies at six decimal
/// places. The stored mean and std are computed from the rounded per-seed
/// values, so reloading and re-aggregating reproduces them exactly at the
/// persisted precision.
pub fn save_report(report: &RunReport, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!(
        "#runreport\tstrategy={}\tmu_pseudo={}\n",
        report.strategy, report.mu_pseudo
    ));
    let rounded: Vec<f64> = report.per_seed_accuracy.iter().map(|&a| round6(a)).collect();
    for (seed, acc) in report.seeds.iter().zip(&rounded) {
        out.push_str(&format!("seed\t{seed}\taccuracy={acc:.6}\n"));
    }
    let (mean, std) = aggregate(&rounded)?;
    out.push_str(&format!("aggregate\tmean={mean:.6}\tstd={std:.6}\n"));
    if let Some(p) = report.p_value_vs_baseline {
        out.push_str(&format!("pvalue\t{p:.6}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a report written by [`save_report`], verifying that the stored
/// aggregate matches a recomputation from the per-seed records.
pub fn load_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut strategy = None;
    let mut mu_pseudo = None;
    let mut seeds = Vec::new();
    let mut accs = Vec::new();
    let mut stored_aggregate = None;
    let mut p_value = None;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.starts_with('#') && !line.starts_with("#runreport") {
            continue; // comment lines (e.g. failed-seed notes)
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.first().copied() {
            Some("#runreport") => {
                for f in &fields[1..] {
                    match f.split_once('=') {
                        Some(("strategy", v)) => strategy = Some(v.to_string()),
                        Some(("mu_pseudo", v)) => {
                            mu_pseudo = Some(v.parse().map_err(|_| {
                                Error::parse(path, lineno, format!("invalid mu_pseudo {v:?}"))
                            })?)
                        }
                        _ => return Err(Error::parse(path, lineno, format!("unexpected field {f:?}"))),
                    }
                }
            }
            Some("seed") if fields.len() == 3 => {
                let seed = fields[1].parse().map_err(|_| {
                    Error::parse(path, lineno, format!("invalid seed {:?}", fields[1]))
                })?;
                let acc = fields[2]
                    .strip_prefix("accuracy=")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "expected accuracy=<value>"))?;
                seeds.push(seed);
                accs.push(acc);
            }
            Some("aggregate") if fields.len() == 3 => {
                let mean = fields[1]
                    .strip_prefix("mean=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "expected mean=<value>"))?;
                let std = fields[2]
                    .strip_prefix("std=")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::parse(path, lineno, "expected std=<value>"))?;
                stored_aggregate = Some((mean, std));
            }
            Some("pvalue") if fields.len() == 2 => {
                p_value = Some(fields[1].parse().map_err(|_| {
                    Error::parse(path, lineno, format!("invalid p-value {:?}", fields[1]))
                })?);
            }
            _ => return Err(Error::parse(path, lineno, format!("unexpected record {line:?}"))),
        }
    }

    let strategy = strategy.ok_or_else(|| Error::parse(path, 1, "missing #runreport header"))?;
    let mu_pseudo = mu_pseudo.ok_or_else(|| Error::parse(path, 1, "missing mu_pseudo"))?;
    let mut report = RunReport::new(strategy, seeds, accs, mu_pseudo)?;
    report.p_value_vs_baseline = p_value;

    if let Some((mean, std)) = stored_aggregate {
        let expected_mean: f64 = round6(report.mean);
        let expected_std: f64 = round6(report.std);
        if format!("{mean:.6}") != format!("{expected_mean:.6}")
            || format!("{std:.6}") != format!("{expected_std:.6}")
        {
            return Err(Error::InvalidData(format!(
                "report {} aggregate does not match its per-seed records",
                path.display()
            )));
        }
    } else {
        return Err(Error::parse(path, 1, "missing aggregate record"));
    }
    Ok(report)
}
