//! Brute-force checks that run independently of the extreme-point reduction.
//!
//! Generators draw a convex potential `V` on a random sub-interval and turn
//! it into a pmf:
//!
//! * interval `[a, b]`: `a = 0` with probability 1/2, otherwise uniform in
//!   `[0, L]`; `b = L` with probability 1/2, otherwise uniform in `[a, L]`;
//! * a steepness scale `s` picked uniformly from `{0.05, 0.5, 2}`;
//! * base slope `~ Normal(0, s)`;
//! * slope increments: `0` with probability 1/2 (affine stretches), otherwise
//!   `Exp` with mean `s/2`.
//!
//! All randomness comes from `ChaCha8Rng` seeded through [`trial_seed`], so
//! serial and parallel runs see identical draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::seqcore::numeric::{compensated_sum, ln_choose, ln_factorial};
use crate::seqcore::{
    convolve, reference_pmf, tilt_log, ulc_finite_report, Pmf, Reference, Seq, SeqFile,
};

/// Slack allowed in `μ(n0) ≥ P(Pois(n0) = n0)`.
pub const THEOREM_TOL: f64 = 1e-10;
/// Margin required from convolutions in the closure sub-suite.
pub const CLOSURE_TOL: f64 = 1e-10;
/// Slack for the domination and entropy sub-suites.
pub const DOMINATION_TOL: f64 = 1e-8;
/// Poisson laws are cut where the remaining tail falls below this.
pub const POISSON_TAIL_CUTOFF: f64 = 1e-14;

/// Largest `max V - min V` produced by [`sample_log_concave`]. Past roughly
/// 16 nats, directions that differ only on the smallest entries fall under
/// the rank threshold.
pub const MAX_POTENTIAL_RANGE: f64 = 12.0;

/// SplitMix64 finalizer applied to `seed + (index + 1)·γ`.
///
/// Used for every per-trial sub-seed in the crate.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_interval(rng: &mut impl Rng, max: u64) -> (u64, u64) {
    let a = if rng.random_bool(0.5) { 0 } else { rng.random_range(0..=max) };
    let b = if rng.random_bool(0.5) { max } else { rng.random_range(a..=max) };
    (a, b)
}

/// Convex potential of length `len` with `V(first) = 0`.
fn random_potential(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let scale = [0.05, 0.5, 2.0][rng.random_range(0..3)];
    let mut slope = Normal::new(0.0, scale).unwrap().sample(rng);
    let increments = Exp::new(2.0 / scale).unwrap();
    let mut v = Vec::with_capacity(len);
    let mut cur = 0.0;
    for _ in 0..len {
        v.push(cur);
        cur += slope;
        if rng.random_bool(0.5) {
            slope += increments.sample(rng);
        }
    }
    v
}

/// Random pmf with `μ(n)·n!` log-concave, supported inside `[0, support]`.
pub fn sample_ulc(support: u64, seed: u64) -> Pmf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = random_interval(&mut rng, support);
    let v = random_potential(&mut rng, (b - a + 1) as usize);
    let logs = (a..=b)
        .zip(&v)
        .map(|(n, vn)| -vn - ln_factorial(n))
        .collect();
    Pmf::from_log_weights(a as i64, logs).expect("finite log-weights")
}

/// Random pmf in `ULC(n)`: `μ(k)/C(n, k)` log-concave on a sub-interval of `[0, n]`.
pub fn sample_ulc_finite(n: u64, seed: u64) -> Pmf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = random_interval(&mut rng, n);
    let v = random_potential(&mut rng, (b - a + 1) as usize);
    let logs = (a..=b).zip(&v).map(|(k, vk)| ln_choose(n, k) - vk).collect();
    Pmf::from_log_weights(a as i64, logs).expect("finite log-weights")
}

/// Positive log-concave sequence on `[0, len - 1]` whose potential has exactly
/// `distinct_slopes` distinct slope values.
///
/// The first slope is `0` with probability 1/5 (exercising the reflected
/// construction), otherwise its magnitude is uniform in `[0.1, 1]`; slope
/// jumps are uniform in `[0.2, 0.8]` at random positions. Slopes are then
/// shrunk by a common factor so the potential spans at most
/// [`MAX_POTENTIAL_RANGE`] nats.
pub fn sample_log_concave(len: usize, distinct_slopes: usize, seed: u64) -> Result<Seq> {
    if len < 2 || distinct_slopes < 1 || distinct_slopes > len - 1 {
        return Err(invalid!(
            "cannot place {distinct_slopes} distinct slopes on {len} points"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions: Vec<usize> = (1..len - 1).collect();
    for i in 0..distinct_slopes - 1 {
        let j = rng.random_range(i..positions.len());
        positions.swap(i, j);
    }
    let mut jumps_at = positions[..distinct_slopes - 1].to_vec();
    jumps_at.sort_unstable();

    let mut slope = if rng.random_bool(0.2) {
        0.0
    } else {
        let m = rng.random_range(0.1..=1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    };
    let mut slopes = Vec::with_capacity(len - 1);
    for n in 0..len - 1 {
        slopes.push(slope);
        if jumps_at.contains(&(n + 1)) {
            slope += rng.random_range(0.2..=0.8);
        }
    }
    let mut v: f64 = rng.random_range(-1.0..=1.0);
    let mut potential = vec![v];
    for s in &slopes {
        v += s;
        potential.push(v);
    }
    let lo = potential.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = potential.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shrink = if hi - lo > MAX_POTENTIAL_RANGE {
        MAX_POTENTIAL_RANGE / (hi - lo)
    } else {
        1.0
    };
    let values = potential.iter().map(|v| (-(v - lo) * shrink).exp()).collect();
    Seq::new(0, values)
}

/// Tilts `μ` so that its mean equals `n0`; returns the pmf and `θ`.
pub fn tilt_to_mean_with_theta(mu: &Pmf, n0: i64) -> Result<(Pmf, f64)> {
    let support = mu.support();
    if !support.contains_strictly(n0) {
        return Err(Error::Infeasible(format!(
            "mean {n0} is not strictly inside the support [{}, {}]",
            support.lo(),
            support.hi()
        )));
    }
    let target = n0 as f64;
    let tol = 1e-12 * target.abs().max(1.0);
    let mean_at = |t: f64| -> f64 {
        tilt_log(mu, t).map(|p| p.mean()).unwrap_or(f64::NAN)
    };

    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let mut step = 1.0;
    while mean_at(hi) < target {
        hi += step;
        step *= 2.0;
    }
    step = 1.0;
    while mean_at(lo) > target {
        lo -= step;
        step *= 2.0;
    }
    let mut best = (f64::INFINITY, 0.0);
    for t in [lo, hi] {
        let r = (mean_at(t) - target).abs();
        if r < best.0 {
            best = (r, t);
        }
    }
    for _ in 0..200 {
        if best.0 <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = mean_at(mid);
        let r = (m - target).abs();
        if r < best.0 {
            best = (r, mid);
        }
        if m < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > tol {
        return Err(Error::NoConvergence(format!(
            "tilted mean residual {:e} above {:e}",
            best.0, tol
        )));
    }
    Ok((tilt_log(mu, best.1)?, best.1.exp()))
}

/// Exponential tilt of `μ` with mean exactly `n0` (to `1e-12·max(1, n0)`).
pub fn tilt_to_mean(mu: &Pmf, n0: i64) -> Result<Pmf> {
    tilt_to_mean_with_theta(mu, n0).map(|(p, _)| p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TrialConfig {
    pub n0: u64,
    #[serde(rename = "L")]
    pub support: u64,
    pub trials: u64,
    pub seed: u64,
}

impl TrialConfig {
    pub fn new(n0: u64, support: u64, trials: u64, seed: u64) -> Result<Self> {
        if n0 < 1 || n0 >= support {
            return Err(invalid!("need 1 <= n0 < L, got n0={n0}, L={support}"));
        }
        if trials < 1 {
            return Err(invalid!("need at least one trial"));
        }
        Ok(Self {
            n0,
            support,
            trials,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub n0: u64,
    #[serde(rename = "L")]
    pub support: u64,
    pub trials: u64,
    pub seed: u64,
    /// Samples whose support strictly contained `n0`.
    pub evaluated: u64,
    pub skipped: u64,
    pub violations: u64,
    pub poisson_prob: f64,
    pub min_observed_prob: Option<f64>,
    /// `min (μ(n0) - P(Pois(n0) = n0))`.
    pub min_gap: Option<f64>,
    pub worst_seed: Option<u64>,
    /// Pmf attaining `min_gap`, after tilting.
    pub worst_pmf: Option<SeqFile>,
}

struct TrialOutcome {
    prob: f64,
    seed: u64,
    pmf: Pmf,
}

fn one_trial(cfg: &TrialConfig, index: u64) -> Result<Option<TrialOutcome>> {
    let seed = trial_seed(cfg.seed, index);
    let mu = sample_ulc(cfg.support, seed);
    if !mu.support().contains_strictly(cfg.n0 as i64) {
        return Ok(None);
    }
    let tilted = tilt_to_mean(&mu, cfg.n0 as i64)?;
    Ok(Some(TrialOutcome {
        prob: tilted.prob(cfg.n0 as i64),
        seed,
        pmf: tilted,
    }))
}

/// Monte-Carlo check of `μ(n0) ≥ P(Pois(n0) = n0)` on random ULC laws
/// tilted to mean `n0`.
pub fn run_theorem_trials(cfg: &TrialConfig) -> Result<TrialReport> {
    run_theorem_trials_with(cfg, Execution::Parallel)
}

pub fn run_theorem_trials_with(cfg: &TrialConfig, exec: Execution) -> Result<TrialReport> {
    let outcomes: Vec<Option<TrialOutcome>> = match exec {
        Execution::Serial => (0..cfg.trials)
            .map(|i| one_trial(cfg, i))
            .collect::<Result<_>>()?,
        Execution::Parallel => (0..cfg.trials)
            .into_par_iter()
            .map(|i| one_trial(cfg, i))
            .collect::<Result<_>>()?,
    };

    let poisson_prob = reference_pmf(Reference::Poisson { lambda: cfg.n0 as f64 }, cfg.n0 as i64)?;
    let mut report = TrialReport {
        n0: cfg.n0,
        support: cfg.support,
        trials: cfg.trials,
        seed: cfg.seed,
        evaluated: 0,
        skipped: 0,
        violations: 0,
        poisson_prob,
        min_observed_prob: None,
        min_gap: None,
        worst_seed: None,
        worst_pmf: None,
    };
    let mut worst: Option<&TrialOutcome> = None;
    for outcome in &outcomes {
        let Some(o) = outcome else {
            report.skipped += 1;
            continue;
        };
        report.evaluated += 1;
        if o.prob < poisson_prob - THEOREM_TOL {
            report.violations += 1;
        }
        if worst.is_none_or(|w| o.prob < w.prob) {
            worst = Some(o);
        }
    }
    if let Some(w) = worst {
        report.min_observed_prob = Some(w.prob);
        report.min_gap = Some(w.prob - poisson_prob);
        report.worst_seed = Some(w.seed);
        report.worst_pmf = Some(w.pmf.to_file());
    }
    Ok(report)
}

/// Poisson probabilities on `[0, N]` with `N` the smallest cut-off whose tail
/// mass is below `tail`; `λ = 0` gives the point mass at 0.
pub fn poisson_truncated_at_tail(lambda: f64, tail: f64) -> Result<Vec<f64>> {
    if lambda == 0.0 {
        return Ok(vec![1.0]);
    }
    let kind = Reference::Poisson { lambda };
    // far enough that the terms beyond are below 1e-300
    let horizon = (lambda + 40.0 * lambda.sqrt() + 800.0).ceil() as i64;
    let probs = (0..=horizon)
        .map(|n| reference_pmf(kind, n))
        .collect::<Result<Vec<_>>>()?;
    let mut suffix = 0.0;
    let mut cut = horizon;
    for n in (0..=horizon).rev() {
        // suffix = P(Z > n)
        if suffix >= tail {
            break;
        }
        cut = n;
        suffix += probs[n as usize];
    }
    Ok(probs[..=cut as usize].to_vec())
}

fn expect_on(probs: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    compensated_sum(probs.iter().enumerate().map(|(n, &p)| p * phi(n as f64)))
}

fn entropy_of(probs: &[f64]) -> f64 {
    -compensated_sum(probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()))
}

/// `E φ(Z) - E φ(X)` for `φ ∈ {x², e^{x/2}, |x - E X|}` with `Z` Poisson of the same mean.
pub fn convex_domination_slacks(mu: &Pmf) -> Result<[f64; 3]> {
    let m = mu.mean();
    let z = poisson_truncated_at_tail(m.max(0.0), POISSON_TAIL_CUTOFF)?;
    let phis: [&dyn Fn(f64) -> f64; 3] = [&|x| x * x, &|x| (x / 2.0).exp(), &|x| (x - m).abs()];
    Ok(phis.map(|phi| expect_on(&z, phi) - mu.expect(phi)))
}

/// `H(Z) - H(X)` with `Z` Poisson of the same mean.
pub fn entropy_slack(mu: &Pmf) -> Result<f64> {
    let z = poisson_truncated_at_tail(mu.mean().max(0.0), POISSON_TAIL_CUTOFF)?;
    Ok(entropy_of(&z) - mu.entropy())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsuiteReport {
    pub cases: u64,
    pub passed: u64,
    pub failed: u64,
    /// Smallest margin (closure) or slack (domination, entropy) seen.
    pub worst: f64,
}

impl SubsuiteReport {
    fn from_values(values: &[f64], threshold: f64) -> Self {
        let passed = values.iter().filter(|&&v| v >= threshold).count() as u64;
        Self {
            cases: values.len() as u64,
            passed,
            failed: values.len() as u64 - passed,
            worst: values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    #[serde(rename = "L")]
    pub support: u64,
    pub cases: u64,
    pub seed: u64,
    pub closure: SubsuiteReport,
    pub domination: SubsuiteReport,
    pub entropy: SubsuiteReport,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.closure.failed == 0 && self.domination.failed == 0 && self.entropy.failed == 0
    }
}

struct CaseOutcome {
    closure_margin: f64,
    domination_slack: f64,
    entropy_slack: f64,
}

fn one_case(support: u64, seed: u64, index: u64) -> Result<CaseOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, index));
    let n = rng.random_range(1..=support);
    let m = rng.random_range(1..=support);
    let a = sample_ulc_finite(n, rng.next_u64());
    let b = sample_ulc_finite(m, rng.next_u64());
    let c = convolve(&a, &b);
    let r = ulc_finite_report(&c, n + m)?;
    let closure_margin = if r.contiguous { r.worst_margin } else { f64::NEG_INFINITY };

    let mu = sample_ulc(support, rng.next_u64());
    let domination_slack = convex_domination_slacks(&mu)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(CaseOutcome {
        closure_margin,
        domination_slack,
        entropy_slack: entropy_slack(&mu)?,
    })
}

/// Seeded checks of three classical facts about ULC laws: closure under
/// convolution, convex domination by the Poisson law of equal mean, and
/// Poisson entropy maximality.
pub fn property_suite(support: u64, cases: u64, seed: u64) -> Result<PropertyReport> {
    if support < 2 {
        return Err(invalid!("property suite needs L >= 2, got {support}"));
    }
    let outcomes = (0..cases)
        .into_par_iter()
        .map(|i| one_case(support, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&CaseOutcome) -> f64| outcomes.iter().map(f).collect::<Vec<_>>();
    Ok(PropertyReport {
        support,
        cases,
        seed,
        closure: SubsuiteReport::from_values(&pick(|o| o.closure_margin), -CLOSURE_TOL),
        domination: SubsuiteReport::from_values(&pick(|o| o.domination_slack), -DOMINATION_TOL),
        entropy: SubsuiteReport::from_values(&pick(|o| o.entropy_slack), -DOMINATION_TOL),
    })
}
