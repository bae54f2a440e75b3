use serde::Serialize;

use super::numeric::{compensated_sum, ln_choose, ln_factorial, log_sum_exp};
use super::seq::{DiscreteInterval, Seq, SeqFile, SeqKind};
use crate::error::{invalid, Result};

/// Inputs whose total mass is within this distance of 1 are renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability mass function on a finite discrete interval.
///
/// Positive entries form a contiguous interval. Natural logs of the entries
/// are kept next to the values so that ratio tests do not lose precision on
/// tiny masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    seq: Seq,
    logs: Vec<f64>,
    support: DiscreteInterval,
}

fn support_of(offset: i64, logs: &[f64]) -> Result<DiscreteInterval> {
    let first = logs.iter().position(|&l| l > f64::NEG_INFINITY);
    let last = logs.iter().rposition(|&l| l > f64::NEG_INFINITY);
    let (a, b) = match (first, last) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(invalid!("pmf has no positive mass")),
    };
    if let Some(i) = logs[a..=b].iter().position(|&l| l == f64::NEG_INFINITY) {
        return Err(invalid!(
            "pmf support is not a discrete interval (zero at {})",
            offset + (a + i) as i64
        ));
    }
    DiscreteInterval::new(offset + a as i64, offset + b as i64)
}

impl Pmf {
    /// Validates a sequence of probabilities; a total mass off by at most
    /// [`NORMALIZATION_TOL`] is renormalized, anything else is rejected.
    pub fn new(seq: Seq) -> Result<Self> {
        if let Some((n, v)) = seq.iter().find(|&(_, v)| v < 0.0) {
            return Err(invalid!("negative probability {v} at index {n}"));
        }
        let total = compensated_sum(seq.values().iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid!("probabilities sum to {total}, not 1"));
        }
        Self::from_weights(seq.offset(), seq.into_values())
    }

    /// Normalizes arbitrary nonnegative weights with positive total.
    pub fn from_weights(offset: i64, weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|&w| !w.is_finite() || w < 0.0) {
            return Err(invalid!("weight at index {} is negative or not finite", offset + i as i64));
        }
        let logs = weights.iter().map(|w| w.ln()).collect();
        Self::from_log_weights(offset, logs)
    }

    /// Normalizes weights given as natural logs (`-inf` for zero weight).
    pub fn from_log_weights(offset: i64, log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(invalid!("pmf must have at least one entry"));
        }
        if log_weights.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(invalid!("log-weights must be finite or -inf"));
        }
        let support = support_of(offset, &log_weights)?;
        let norm = log_sum_exp(&log_weights);
        let logs: Vec<f64> = log_weights.iter().map(|l| l - norm).collect();
        let values = logs.iter().map(|l| l.exp()).collect();
        Ok(Self {
            seq: Seq::new(offset, values)?,
            logs,
            support,
        })
    }

    pub fn point_mass(at: i64) -> Self {
        Self::from_log_weights(at, vec![0.0]).expect("point mass is valid")
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::binomial(1, p)
    }

    /// `Bin(n, p)` on `[0, n]`.
    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        let kind = Reference::Binomial { n, p };
        let logs = (0..=n as i64)
            .map(|k| ln_reference_pmf(kind, k))
            .collect::<Result<Vec<_>>>()?;
        Self::from_log_weights(0, logs)
    }

    /// `Pois(λ)` restricted to `[0, support]` and renormalized.
    pub fn poisson_truncated(lambda: f64, support: u64) -> Result<Self> {
        let kind = Reference::Poisson { lambda };
        let logs = (0..=support as i64)
            .map(|k| ln_reference_pmf(kind, k))
            .collect::<Result<Vec<_>>>()?;
        Self::from_log_weights(0, logs)
    }

    pub fn seq(&self) -> &Seq {
        &self.seq
    }

    pub fn offset(&self) -> i64 {
        self.seq.offset()
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        self.seq.values()
    }

    /// Natural logs of the entries, `-inf` for zero mass.
    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    /// Indices carrying positive mass.
    pub fn support(&self) -> DiscreteInterval {
        self.support
    }

    pub fn prob(&self, n: i64) -> f64 {
        self.seq.get(n)
    }

    pub fn ln_prob(&self, n: i64) -> f64 {
        let i = n - self.offset();
        if i < 0 || i as usize >= self.logs.len() {
            return f64::NEG_INFINITY;
        }
        self.logs[i as usize]
    }

    /// `E φ(X)` with compensated summation.
    pub fn expect(&self, phi: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.seq.iter().map(|(n, p)| if p > 0.0 { p * phi(n as f64) } else { 0.0 }))
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|x| (x - m) * (x - m))
    }

    /// Shannon entropy in nats, `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -compensated_sum(
            self.values()
                .iter()
                .zip(&self.logs)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &l)| p * l),
        )
    }

    pub fn to_file(&self) -> SeqFile {
        SeqFile::from_seq(&self.seq, SeqKind::Pmf)
    }
}

/// Reference laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Reference {
    Poisson { lambda: f64 },
    Binomial { n: u64, p: f64 },
}

/// Natural log of the reference pmf at `at`.
pub fn ln_reference_pmf(kind: Reference, at: i64) -> Result<f64> {
    if at < 0 {
        return Err(invalid!("pmf evaluated at negative index {at}"));
    }
    let k = at as u64;
    match kind {
        Reference::Poisson { lambda } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(invalid!("Poisson rate must be positive, got {lambda}"));
            }
            Ok(k as f64 * lambda.ln() - lambda - ln_factorial(k))
        }
        Reference::Binomial { n, p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid!("binomial p must lie in (0, 1), got {p}"));
            }
            if k > n {
                return Err(invalid!("binomial({n}, p) evaluated at {k} > n"));
            }
            Ok(ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p())
        }
    }
}

/// Reference pmf value, computed in log-space.
pub fn reference_pmf(kind: Reference, at: i64) -> Result<f64> {
    ln_reference_pmf(kind, at).map(f64::exp)
}

/// `P(Pois(λ) > beyond)`, summed directly over the tail.
pub fn poisson_tail(lambda: f64, beyond: u64) -> Result<f64> {
    let kind = Reference::Poisson { lambda };
    let mut total = 0.0;
    let mut n = beyond + 1;
    loop {
        let term = reference_pmf(kind, n as i64)?;
        total += term;
        if (n as f64 > lambda && term <= total * 1e-18) || term == 0.0 && n as f64 > lambda {
            return Ok(total);
        }
        n += 1;
    }
}

/// Law of the sum of two independent variables.
pub fn convolve(a: &Pmf, b: &Pmf) -> Pmf {
    let (x, y) = (a.values(), b.values());
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &p) in x.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (j, &q) in y.iter().enumerate() {
            out[i + j] += p * q;
        }
    }
    Pmf::from_weights(a.offset() + b.offset(), out).expect("convolution of pmfs is a pmf")
}

/// Exponential tilt `μ(n)·θ^n`, renormalized.
pub fn tilt(mu: &Pmf, theta: f64) -> Result<Pmf> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid!("tilt parameter must be positive, got {theta}"));
    }
    tilt_log(mu, theta.ln())
}

/// Tilt by `θ = e^t`; lets callers move `θ` far beyond the range of `f64`.
pub fn tilt_log(mu: &Pmf, log_theta: f64) -> Result<Pmf> {
    let offset = mu.offset();
    let logs = mu
        .logs()
        .iter()
        .enumerate()
        .map(|(i, &l)| l + (offset + i as i64) as f64 * log_theta)
        .collect();
    Pmf::from_log_weights(offset, logs)
}
