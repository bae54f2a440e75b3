//! Expected values computed by routes that do not share code with the
//! implementation: plain polynomial arithmetic, hand-built bases, finite
//! differences.

use ulc_core::extremal::{h_value, MeanSolution};
use ulc_core::freedom::{numerical_rank, unit_cube_draws, RANK_TOL};
use ulc_core::{
    certify_dof, family_profile, minimize_prob_at_mean, perturbation_basis, solve_mean,
    validate_log_concave, Seq,
};

const LN2: f64 = std::f64::consts::LN_2;

/// `(f, f', f'')` by direct summation with factorials accumulated as products.
fn direct_series(k: u64, l: u64, x: f64) -> (f64, f64, f64) {
    let (mut f, mut fp, mut fpp) = (0.0, 0.0, 0.0);
    let mut fact = 1.0;
    for i in 0..=l {
        if i > 0 {
            fact *= i as f64;
        }
        if i < k {
            continue;
        }
        let i_f = i as f64;
        f += x.powi(i as i32) / fact;
        if i >= 1 {
            fp += i_f * x.powi(i as i32 - 1) / fact;
        }
        if i >= 2 {
            fpp += i_f * (i_f - 1.0) * x.powi(i as i32 - 2) / fact;
        }
    }
    (f, fp, fpp)
}

fn direct_mean(k: u64, l: u64, x: f64) -> f64 {
    let (f, fp, _) = direct_series(k, l, x);
    x * fp / f
}

/// Minimum of `μ(n0)` over the family by plain bisection on `x` itself.
fn brute_force_min_prob(n0: u64, support: u64) -> f64 {
    let mut best = 1.0f64;
    for k in 0..n0 {
        for l in n0 + 1..=support {
            let (mut lo, mut hi) = (1e-9, 1.0);
            while direct_mean(k, l, hi) < n0 as f64 {
                hi *= 2.0;
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if direct_mean(k, l, mid) < n0 as f64 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            let (f, _, _) = direct_series(k, l, x);
            let fact: f64 = (1..=n0).map(|i| i as f64).product();
            best = best.min(x.powi(n0 as i32) / fact / f);
        }
    }
    best
}

#[test]
fn profile_matches_direct_series() {
    for &(k, l, x) in &[(0, 1, 1.0), (0, 5, 0.3), (2, 9, 3.7), (1, 12, 11.0), (4, 4, 2.0)] {
        let p = family_profile(k, l, x).unwrap();
        let (f, fp, fpp) = direct_series(k, l, x);
        assert!((p.f - f).abs() <= 1e-13 * f, "f at {k},{l},{x}");
        assert!((p.f_prime - fp).abs() <= 1e-13 * fp, "f' at {k},{l},{x}");
        assert!((p.f_second - fpp).abs() <= 1e-13 * fpp.max(1e-300), "f'' at {k},{l},{x}");
        let claim1 = -x * fp * fp + x * f * fpp + f * fp;
        assert!((p.claim1 - claim1).abs() <= 1e-12 * (f * fp + x * fp * fp));
        let h = x * fp / f - x * fp / f * (fp / f).ln() - f.ln();
        assert!((p.h - h).abs() <= 1e-12 * h.abs().max(1.0));
    }
}

#[test]
fn h_prime_matches_finite_differences() {
    for &(k, l) in &[(0, 1), (0, 6), (1, 2), (2, 7), (3, 15), (5, 5), (0, 30)] {
        for &x in &[0.05, 0.4, 1.0, 2.5, 7.0, 20.0] {
            let p = family_profile(k, l, x).unwrap();
            let step = 1e-5 * x;
            let fd = (h_value(k, l, x + step).unwrap() - h_value(k, l, x - step).unwrap())
                / (2.0 * step);
            // truncation O(step²) plus the quotient's own rounding
            let magnitude = p.h.abs().max(p.ln_f.abs()).max(1.0);
            let roundoff = 4.0 * f64::EPSILON * magnitude / step;
            assert!(
                (fd - p.h_prime).abs() <= 1e-6 * p.h_prime.abs() + roundoff,
                "k={k} l={l} x={x}: fd {fd} vs {}",
                p.h_prime
            );
        }
    }
}

#[test]
fn mean_equation_closed_form_and_brute_force() {
    let MeanSolution::Interior(x) = solve_mean(0, 2, 1).unwrap() else {
        panic!("interior root expected")
    };
    assert!((x - 2f64.sqrt()).abs() < 1e-12);
    for &(k, l, n0) in &[(0, 4, 2), (1, 6, 3), (0, 10, 7)] {
        let MeanSolution::Interior(x) = solve_mean(k, l, n0).unwrap() else {
            panic!()
        };
        assert!((direct_mean(k, l, x) - n0 as f64).abs() < 1e-11);
    }
}

#[test]
fn reduction_matches_brute_force_enumeration() {
    for &(n0, support) in &[(1, 2), (1, 5), (2, 6), (3, 9), (2, 12)] {
        let r = minimize_prob_at_mean(n0, support).unwrap();
        let brute = brute_force_min_prob(n0, support);
        assert!(
            (r.min_prob - brute).abs() < 1e-11,
            "n0={n0} L={support}: {} vs {brute}",
            r.min_prob
        );
    }
    // (n0, L) = (1, 2): only (0, 2) is interior; μ(1) = √2/(2 + √2) = √2 - 1
    let r = minimize_prob_at_mean(1, 2).unwrap();
    assert!((r.min_prob - (2f64.sqrt() - 1.0)).abs() < 1e-12);
}

#[test]
fn reflected_basis_matches_hand_construction() {
    // p = (1, 1, 1/2, 1/4): first slope 0, so the reversed sequence
    // (1/4, 1/2, 1, 1) with V = (ln4, ln2, 0, 0), slopes (-ln2, -ln2, 0),
    // breakpoints {0, 2} is used:
    //   V_0 = (ln4, ln2, 0, -ln2), V_1 = (ln4, ln2, 0, 0), reversed back.
    let p = Seq::new(0, vec![1.0, 1.0, 0.5, 0.25]).unwrap();
    let v0 = [-LN2, 0.0, LN2, 2.0 * LN2];
    let v1 = [0.0, 0.0, LN2, 2.0 * LN2];
    let b = perturbation_basis(&p).unwrap();
    assert!(b.reflected);
    assert_eq!(b.directions.len(), 3);
    assert_eq!(b.directions[0], p);
    for n in 0..4 {
        assert!((b.directions[1].values()[n] - p.values()[n] * v0[n]).abs() < 1e-15);
        assert!((b.directions[2].values()[n] - p.values()[n] * v1[n]).abs() < 1e-15);
    }
    assert_eq!(numerical_rank(&b.directions, RANK_TOL), 3);

    let cert = certify_dof(&p, 100, 5).unwrap();
    let draws = unit_cube_draws(3, 200, 77);
    assert!(cert.holds_for(&p, &draws, cert.epsilon));
}

#[test]
fn geometric_basis_is_p_and_p_times_linear_potential() {
    let p = Seq::new(0, vec![1.0, 0.5, 0.25, 0.125]).unwrap();
    let b = perturbation_basis(&p).unwrap();
    let expected = [0.0, 0.5 * LN2, 0.5 * LN2, 0.375 * LN2];
    for (got, want) in b.directions[1].values().iter().zip(expected) {
        assert!((got - want).abs() < 1e-15);
    }
    // p + δ p + δ_0 pV = e^{-V}(1 + δ + δ_0 n ln2): log-concave while positive
    for &(d, d0) in &[(0.2, 0.1), (-0.3, -0.2), (0.0, 0.25)] {
        let q = p.perturbed(&b.directions, &[d, d0]).unwrap();
        assert!(validate_log_concave(&q).unwrap().is_log_concave);
    }
}
