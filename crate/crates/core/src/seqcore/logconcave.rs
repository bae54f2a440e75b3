//! Log-concavity and ultra-log-concavity predicates.
//!
//! All checks go through [`report_from_logs`], which works on natural logs of
//! the entries (`-inf` for zeros). For three positive neighbours the local
//! margin `1 - p(n+1)p(n-1)/p(n)^2` is evaluated as `-expm1(d)` with
//! `d = ln p(n+1) + ln p(n-1) - 2 ln p(n)`, so it is scale-free and exact for
//! equality cases such as geometric and Poisson sequences.

use serde::Serialize;

use super::numeric::{ln_choose, ln_factorial};
use super::pmf::Pmf;
use super::seq::Seq;
use crate::error::{invalid, Result};

/// Relative tolerance on the local margin.
pub const LOG_CONCAVITY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogConcavityReport {
    pub is_log_concave: bool,
    /// Whether the positive entries form a discrete interval.
    pub contiguous: bool,
    /// Absolute index of the smallest margin (the first one on ties).
    pub worst_index: Option<i64>,
    /// `min_n (p(n)^2 - p(n+1)p(n-1)) / p(n)^2` over interior `n`.
    ///
    /// `1` when there is no interior point, `-inf` at an interior zero with
    /// positive neighbours.
    pub worst_margin: f64,
}

fn local_margin(prev: f64, cur: f64, next: f64) -> f64 {
    let prev_pos = prev > f64::NEG_INFINITY;
    let next_pos = next > f64::NEG_INFINITY;
    if cur == f64::NEG_INFINITY {
        if prev_pos && next_pos {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else if prev_pos && next_pos {
        -(prev + next - 2.0 * cur).exp_m1()
    } else {
        // one neighbour is zero: p(n)^2 - 0 > 0
        1.0
    }
}

/// Core routine: `logs[i]` is `ln p(offset + i)`, `-inf` for a zero entry.
pub fn report_from_logs(offset: i64, logs: &[f64]) -> LogConcavityReport {
    let first = logs.iter().position(|&l| l > f64::NEG_INFINITY);
    let last = logs.iter().rposition(|&l| l > f64::NEG_INFINITY);
    let contiguous = match (first, last) {
        (Some(a), Some(b)) => logs[a..=b].iter().all(|&l| l > f64::NEG_INFINITY),
        _ => false,
    };

    let mut worst_index = None;
    let mut worst_margin = 1.0;
    for i in 1..logs.len().saturating_sub(1) {
        let m = local_margin(logs[i - 1], logs[i], logs[i + 1]);
        if worst_index.is_none() || m < worst_margin {
            worst_margin = m;
            worst_index = Some(offset + i as i64);
        }
    }

    LogConcavityReport {
        is_log_concave: contiguous && worst_margin >= -LOG_CONCAVITY_RTOL,
        contiguous,
        worst_index,
        worst_margin,
    }
}

/// Log-concavity of a nonnegative sequence; negative entries are rejected.
pub fn validate_log_concave(s: &Seq) -> Result<LogConcavityReport> {
    if let Some((n, v)) = s.iter().find(|&(_, v)| v < 0.0) {
        return Err(invalid!("negative entry {v} at index {n}"));
    }
    let logs: Vec<f64> = s.values().iter().map(|v| v.ln()).collect();
    Ok(report_from_logs(s.offset(), &logs))
}

fn require_nonnegative_support(mu: &Pmf, n: Option<u64>) -> Result<()> {
    let support = mu.support();
    if support.lo() < 0 {
        return Err(invalid!("pmf has mass at negative index {}", support.lo()));
    }
    if let Some(n) = n {
        if support.hi() > n as i64 {
            return Err(invalid!("pmf has mass at {} outside [0, {n}]", support.hi()));
        }
    }
    Ok(())
}

/// Report for `μ(k) / C(n, k)`, restricted to the part of the carrier in `[0, n]`.
pub fn ulc_finite_report(mu: &Pmf, n: u64) -> Result<LogConcavityReport> {
    require_nonnegative_support(mu, Some(n))?;
    let lo = mu.offset().max(0);
    let hi = (mu.offset() + mu.len() as i64 - 1).min(n as i64);
    let logs: Vec<f64> = (lo..=hi)
        .map(|k| mu.ln_prob(k) - ln_choose(n, k as u64))
        .collect();
    Ok(report_from_logs(lo, &logs))
}

/// Whether `μ ∈ ULC(n)`.
pub fn is_ulc_finite(mu: &Pmf, n: u64) -> Result<bool> {
    Ok(ulc_finite_report(mu, n)?.is_log_concave)
}

/// Report for `μ(k)·k!`, i.e. log-concavity relative to a Poisson law.
pub fn ulc_inf_report(mu: &Pmf) -> Result<LogConcavityReport> {
    require_nonnegative_support(mu, None)?;
    let lo = mu.offset().max(0);
    let hi = mu.offset() + mu.len() as i64 - 1;
    let logs: Vec<f64> = (lo..=hi)
        .map(|k| mu.ln_prob(k) + ln_factorial(k as u64))
        .collect();
    Ok(report_from_logs(lo, &logs))
}

/// Whether `μ` is ultra-log-concave in the Poisson sense.
pub fn is_ulc_inf(mu: &Pmf) -> Result<bool> {
    Ok(ulc_inf_report(mu)?.is_log_concave)
}
