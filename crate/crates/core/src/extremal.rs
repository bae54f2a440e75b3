//! Extreme points of the fixed-mean problem: the truncated exponential family
//! `μ(n) = x^n / (n!·f(x))` on `[k, l]`, with `f(x) = Σ_{i=k}^{l} x^i/i!`.
//!
//! Series are evaluated relative to the largest term `x^i/i!`; raw values of
//! `f`, `f'`, `f''` may overflow for large `x`, but every derived quantity
//! (mean, `h`, `ψ`, the sign of `claim1`) is computed from the scaled sums.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::seqcore::numeric::ln_factorial;
use crate::seqcore::{format_f64, poisson_tail, reference_pmf, Pmf, Reference};

/// Mean-equation and `ψ` solvers stop after this many bisection steps.
pub const MAX_BISECTIONS: usize = 200;
/// Residual target of [`solve_mean`], relative to `max(1, n0)`.
pub const MEAN_RTOL: f64 = 1e-12;
/// Residual target `|f(y0) - f'(y0)| / f(y0)` of [`find_psi_zero`].
pub const PSI_ZERO_RTOL: f64 = 1e-10;

/// `Σ w_i`, `Σ i w_i`, `Σ i(i-1) w_i` with `w_i = e^{-log_scale}·x^i/i!`.
#[derive(Debug, Clone, Copy)]
struct ScaledSeries {
    log_scale: f64,
    s0: f64,
    s1: f64,
    s2: f64,
}

fn scaled_series(k: u64, l: u64, ln_x: f64) -> ScaledSeries {
    let log_terms: Vec<f64> = (k..=l).map(|i| i as f64 * ln_x - ln_factorial(i)).collect();
    let log_scale = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (i, lt) in (k..=l).zip(&log_terms) {
        let w = (lt - log_scale).exp();
        let i = i as f64;
        s0 += w;
        s1 += i * w;
        s2 += i * (i - 1.0) * w;
    }
    ScaledSeries {
        log_scale,
        s0,
        s1,
        s2,
    }
}

impl ScaledSeries {
    fn mean(&self) -> f64 {
        self.s1 / self.s0
    }

    fn ln_f(&self) -> f64 {
        self.log_scale + self.s0.ln()
    }

    /// `μ(n) = x^n/(n!·f(x))`.
    fn prob_at(&self, n: u64, ln_x: f64) -> f64 {
        (n as f64 * ln_x - ln_factorial(n) - self.log_scale).exp() / self.s0
    }
}

/// The pmf `x^n/(n!·f(x))` on `[k, l]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncExpFamily {
    pub k: u64,
    pub l: u64,
    pub x: f64,
}

impl TruncExpFamily {
    pub fn new(k: u64, l: u64, x: f64) -> Result<Self> {
        if k > l {
            return Err(invalid!("need k <= l, got k={k}, l={l}"));
        }
        if !(x > 0.0 && x.is_finite()) {
            return Err(invalid!("x must be positive, got {x}"));
        }
        Ok(Self { k, l, x })
    }

    pub fn pmf(&self) -> Pmf {
        let ln_x = self.x.ln();
        let logs = (self.k..=self.l)
            .map(|i| i as f64 * ln_x - ln_factorial(i))
            .collect();
        Pmf::from_log_weights(self.k as i64, logs).expect("family weights are positive")
    }

    /// `μ(n)`, zero outside `[k, l]`.
    pub fn prob(&self, n: u64) -> f64 {
        if n < self.k || n > self.l {
            return 0.0;
        }
        let ln_x = self.x.ln();
        scaled_series(self.k, self.l, ln_x).prob_at(n, ln_x)
    }

    pub fn profile(&self) -> Result<FamilyProfile> {
        family_profile(self.k, self.l, self.x)
    }
}

/// Everything the analytic argument needs at one point `x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyProfile {
    pub k: u64,
    pub l: u64,
    pub x: f64,
    pub f: f64,
    pub f_prime: f64,
    pub f_second: f64,
    pub ln_f: f64,
    /// `x f'/f`.
    pub mean: f64,
    /// `x f'/f - x f'/f·ln(f'/f) - ln f`.
    pub h: f64,
    /// `ψ·claim1/f²`.
    pub h_prime: f64,
    /// `-ln(f'/f)`.
    pub psi: f64,
    /// `-x f'^2 + x f f'' + f f'`.
    pub claim1: f64,
    /// `claim1 / (f f' + x f'^2)`, finite even when `claim1` overflows.
    pub claim1_rel: f64,
}

/// Evaluates `f`, its derivatives, `h`, `h'`, `ψ` and the claim-1 expression.
///
/// Fails for `x <= 0`, `k > l`, and the constant family `k = l = 0`.
pub fn family_profile(k: u64, l: u64, x: f64) -> Result<FamilyProfile> {
    TruncExpFamily::new(k, l, x)?;
    if l == 0 {
        return Err(Error::Degenerate("f is constant for k = l = 0".into()));
    }
    let ln_x = x.ln();
    let s = scaled_series(k, l, ln_x);
    let scale = s.log_scale.exp();

    let mean = s.mean();
    // ln(f'/f) = ln(s1) - ln(x) - ln(s0)
    let ln_ratio = s.s1.ln() - ln_x - s.s0.ln();
    let psi = -ln_ratio;
    let ln_f = s.ln_f();
    let h = mean * (1.0 - ln_ratio) - ln_f;

    // claim1·e^{-2·log_scale}, straight from f, f', f'' in scaled form
    let f_s = s.s0;
    let fp_s = s.s1 / x;
    let fpp_s = s.s2 / (x * x);
    let claim1_s = -x * fp_s * fp_s + x * f_s * fpp_s + f_s * fp_s;
    let claim1_scale = f_s * fp_s + x * fp_s * fp_s;

    Ok(FamilyProfile {
        k,
        l,
        x,
        f: scale * f_s,
        f_prime: scale * fp_s,
        f_second: scale * fpp_s,
        ln_f,
        mean,
        h,
        h_prime: psi * claim1_s / (f_s * f_s),
        psi,
        claim1: claim1_s * scale * scale,
        claim1_rel: claim1_s / claim1_scale,
    })
}

/// `h(x)`, including the limit `h(0) = -ln f(0) = 0` when `k = 0`.
pub fn h_value(k: u64, l: u64, x: f64) -> Result<f64> {
    if x == 0.0 && k == 0 && l >= 1 {
        return Ok(0.0);
    }
    Ok(family_profile(k, l, x)?.h)
}

/// Root of the mean equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MeanSolution {
    /// `x0` with `x0 f'(x0)/f(x0) = n0`.
    Interior(f64),
    /// `n0` is an endpoint of `[k, l]`; only the point mass at `n0` (the
    /// limit `x → 0` or `x → ∞`) has that mean, and `μ(n0) = 1`.
    PointMass,
}

/// Bisection on a function increasing in `t`, after expanding a bracket around 0.
fn bisect_increasing(
    target: f64,
    tol: f64,
    eval: impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let mut step = 1.0;
    while eval(hi) < target {
        hi += step;
        step *= 2.0;
        if step > 1e6 {
            return Err(Error::NoConvergence("bracket expansion (upper) failed".into()));
        }
    }
    step = 1.0;
    while eval(lo) > target {
        lo -= step;
        step *= 2.0;
        if step > 1e6 {
            return Err(Error::NoConvergence("bracket expansion (lower) failed".into()));
        }
    }
    let mut best = (f64::INFINITY, lo);
    for t in [lo, hi] {
        let r = (eval(t) - target).abs();
        if r < best.0 {
            best = (r, t);
        }
    }
    // run to bracket collapse: the tolerance only gates acceptance
    for _ in 0..MAX_BISECTIONS {
        if best.0 == 0.0 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let value = eval(mid);
        let r = (value - target).abs();
        if r < best.0 {
            best = (r, mid);
        }
        if value < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= tol {
        Ok(best.1)
    } else {
        Err(Error::NoConvergence(format!(
            "bisection stalled with residual {:e} > {:e}",
            best.0, tol
        )))
    }
}

/// Solves `x f'(x)/f(x) = n0` by bisection in `ln x`.
pub fn solve_mean(k: u64, l: u64, n0: u64) -> Result<MeanSolution> {
    if k > l {
        return Err(invalid!("need k <= l, got k={k}, l={l}"));
    }
    if n0 < k || n0 > l {
        return Err(Error::Infeasible(format!("mean {n0} outside [{k}, {l}]")));
    }
    if n0 == k || n0 == l {
        return Ok(MeanSolution::PointMass);
    }
    let target = n0 as f64;
    let tol = MEAN_RTOL * target.max(1.0);
    let t = bisect_increasing(target, tol, |t| scaled_series(k, l, t).mean())?;
    Ok(MeanSolution::Interior(t.exp()))
}

/// Outcome of [`minimize_prob_at_mean`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalResult {
    pub n0: u64,
    #[serde(rename = "L")]
    pub support: u64,
    pub best_k: u64,
    pub best_l: u64,
    /// `None` when the minimizer is a point-mass limit.
    pub best_x: Option<f64>,
    pub min_prob: f64,
    pub poisson_prob: f64,
    pub gap: f64,
    /// `P(Pois(n0) > L)`: mass the finite-support surrogate cannot see.
    pub poisson_tail: f64,
}

/// CSV header matching [`ExtremalResult::csv_row`].
pub const EXTREMAL_CSV_HEADER: &str = "n0,L,k,l,x0,min_prob,poisson_prob,gap";

impl ExtremalResult {
    pub fn csv_row(&self) -> String {
        let x = self.best_x.map(format_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n0,
            self.support,
            self.best_k,
            self.best_l,
            x,
            format_f64(self.min_prob),
            format_f64(self.poisson_prob),
            format_f64(self.gap)
        )
    }
}

/// `μ(n0)` for the family on `[k, l]` with mean `n0`, and its `x0`.
pub fn family_prob_at_mean(k: u64, l: u64, n0: u64) -> Result<(Option<f64>, f64)> {
    match solve_mean(k, l, n0)? {
        MeanSolution::PointMass => Ok((None, 1.0)),
        MeanSolution::Interior(x) => {
            let ln_x = x.ln();
            Ok((Some(x), scaled_series(k, l, ln_x).prob_at(n0, ln_x)))
        }
    }
}

/// Minimum of `μ(n0)` over the two-parameter extreme-point family on
/// `[0, support]` with mean `n0`; every `(k, l)` with `k ≤ n0 ≤ l` is tried and
/// ties go to the lexicographically smallest pair.
pub fn minimize_prob_at_mean(n0: u64, support: u64) -> Result<ExtremalResult> {
    if n0 < 1 || n0 > support {
        return Err(invalid!("need 1 <= n0 <= L, got n0={n0}, L={support}"));
    }
    let pairs: Vec<(u64, u64)> = (0..=n0)
        .flat_map(|k| (n0..=support).map(move |l| (k, l)))
        .collect();
    let values = pairs
        .par_iter()
        .map(|&(k, l)| family_prob_at_mean(k, l, n0))
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for (i, (_, p)) in values.iter().enumerate() {
        if *p < values[best].1 {
            best = i;
        }
    }
    let (best_k, best_l) = pairs[best];
    let (best_x, min_prob) = values[best];
    let poisson = Reference::Poisson { lambda: n0 as f64 };
    let poisson_prob = reference_pmf(poisson, n0 as i64)?;
    Ok(ExtremalResult {
        n0,
        support,
        best_k,
        best_l,
        best_x,
        min_prob,
        poisson_prob,
        gap: min_prob - poisson_prob,
        poisson_tail: poisson_tail(n0 as f64, support)?,
    })
}

/// The zero `y0 ≥ 0` of `ψ = -ln(f'/f)`.
///
/// For `k = 0` this is `0` (`f(0) = f'(0) = 1`); otherwise `ψ = ln x - ln(mean)`
/// increases from `-∞` to `∞` and is bisected in `ln x`.
pub fn find_psi_zero(k: u64, l: u64) -> Result<f64> {
    if k > l {
        return Err(invalid!("need k <= l, got k={k}, l={l}"));
    }
    if l == 0 {
        return Err(Error::Degenerate("f is constant for k = l = 0".into()));
    }
    if k == 0 {
        return Ok(0.0);
    }
    // -ψ(e^t) = ln(mean) - t, decreasing in t; bisect t - ln(mean) = 0
    let t = bisect_increasing(0.0, 1e-13, |t| t - scaled_series(k, l, t).mean().ln())?;
    let y0 = t.exp();
    let s = scaled_series(k, l, t);
    let residual = (1.0 - s.s1 / (y0 * s.s0)).abs();
    if residual > PSI_ZERO_RTOL {
        return Err(Error::NoConvergence(format!(
            "psi zero residual {residual:e} for k={k}, l={l}"
        )));
    }
    Ok(y0)
}

/// Grid check that `h` is minimized at `y0` and that `h(y0) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HProfileReport {
    pub k: u64,
    pub l: u64,
    pub y0: f64,
    /// `|f(y0) - f'(y0)| / f(y0)`.
    pub y0_residual: f64,
    pub h_at_y0: f64,
    /// `y0 - ln f(y0)`, i.e. `ln(e^{y0}/f(y0))`.
    pub exp_margin: f64,
    pub grid: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_min_h: f64,
    pub grid_argmin: f64,
    /// `min_x h(x) - h(y0)` over the grid.
    pub min_excess: f64,
    /// `ψ` never decreases by more than `1e-12` between grid neighbours.
    pub psi_monotone: bool,
    pub passed: bool,
}

/// Log-spaced grid from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|j| (a + (b - a) * j as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Evaluates `h` on `grid` log-spaced points spanning
/// `[max(1e-6, y0/1e3), 1e3·y0 + 1]` and checks the chain
/// `h(x) ≥ h(y0)`, `h(y0) = y0 - ln f(y0) ≥ 0`, `e^{y0} ≥ f(y0)`.
pub fn verify_h_nonneg(k: u64, l: u64, grid: usize) -> Result<HProfileReport> {
    if grid < 3 {
        return Err(invalid!("grid needs at least 3 points, got {grid}"));
    }
    let y0 = find_psi_zero(k, l)?;
    let (h_at_y0, exp_margin, y0_residual) = if y0 == 0.0 {
        // f(0) = f'(0) = 1 when k = 0
        (0.0, 0.0, 0.0)
    } else {
        let p = family_profile(k, l, y0)?;
        let residual = (1.0 - (-p.psi).exp()).abs();
        (p.h, y0 - p.ln_f, residual)
    };

    let lo = (y0 / 1e3).max(1e-6);
    let hi = y0 * 1e3 + 1.0;
    let xs = log_grid(lo, hi, grid);
    let profiles = xs
        .iter()
        .map(|&x| family_profile(k, l, x))
        .collect::<Result<Vec<_>>>()?;

    let (mut grid_min_h, mut grid_argmin) = (f64::INFINITY, lo);
    for p in &profiles {
        if p.h < grid_min_h {
            grid_min_h = p.h;
            grid_argmin = p.x;
        }
    }
    let psi_monotone = profiles.windows(2).all(|w| w[1].psi > w[0].psi - 1e-12);
    let min_excess = grid_min_h - h_at_y0;
    let passed = min_excess >= -1e-10
        && h_at_y0 >= -1e-12
        && exp_margin >= (-1e-12f64).ln_1p()
        && y0_residual <= PSI_ZERO_RTOL
        && psi_monotone;

    Ok(HProfileReport {
        k,
        l,
        y0,
        y0_residual,
        h_at_y0,
        exp_margin,
        grid,
        grid_lo: lo,
        grid_hi: hi,
        grid_min_h,
        grid_argmin,
        min_excess,
        psi_monotone,
        passed,
    })
}
