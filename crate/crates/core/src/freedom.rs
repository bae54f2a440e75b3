//! Discrete degrees of freedom of positive log-concave sequences.
//!
//! Writing `p = e^{-V}` with `V` convex, the slope sequence `V(n+1) - V(n)`
//! is non-decreasing. Each strict increase of the slope opens one more
//! direction along which `p` can be perturbed while staying log-concave:
//! with breakpoints `n_0 < n_1 < … < n_k`, the directions are `p` itself and
//! `p·V_i`, where `V_i` agrees with `V` up to `n_i` and continues affinely
//! with slope `V'(n_i)` afterwards.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::oracle::trial_seed;
use crate::seqcore::{validate_log_concave, DiscreteInterval, Seq, SeqFile, SeqKind};

/// Absolute convexity tolerance for potentials.
pub const CONVEXITY_ATOL: f64 = 1e-10;
/// Two slopes closer than this count as equal.
pub const SLOPE_TOL: f64 = 1e-9;
/// Singular-value cut-off for directions scaled to unit max-entry.
pub const RANK_TOL: f64 = 1e-8;
/// Halvings of `ε` tried by [`certify_dof`] after starting at 1.
pub const MAX_HALVINGS: u32 = 60;
/// Sample count used by [`is_extreme_candidate`].
pub const DEFAULT_SAMPLES: usize = 100;

/// `V = -ln p`, convex.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential(Seq);

impl Potential {
    pub fn new(seq: Seq) -> Result<Self> {
        let v = seq.values();
        for i in 1..v.len().saturating_sub(1) {
            if v[i + 1] + v[i - 1] - 2.0 * v[i] < -CONVEXITY_ATOL {
                return Err(invalid!(
                    "potential is not convex at index {}",
                    seq.offset() + i as i64
                ));
            }
        }
        Ok(Self(seq))
    }

    /// Potential of a strictly positive log-concave sequence.
    pub fn from_weights(p: &Seq) -> Result<Self> {
        if let Some((n, v)) = p.iter().find(|&(_, v)| v <= 0.0) {
            return Err(invalid!("entry {v} at index {n} is not positive"));
        }
        Self::new(Seq::new(p.offset(), p.values().iter().map(|v| -v.ln()).collect())?)
    }

    pub fn seq(&self) -> &Seq {
        &self.0
    }

    /// `e^{-V}`.
    pub fn weights(&self) -> Seq {
        Seq::new(self.0.offset(), self.0.values().iter().map(|v| (-v).exp()).collect())
            .expect("exp of finite values is finite")
    }
}

/// First differences `V(n+1) - V(n)`, indexed by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeSeq(Seq);

impl SlopeSeq {
    pub fn seq(&self) -> &Seq {
        &self.0
    }
}

pub fn slope_sequence(v: &Potential) -> Result<SlopeSeq> {
    let vals = v.seq().values();
    if vals.len() < 2 {
        return Err(Error::Degenerate("a one-point potential has no slopes".into()));
    }
    let diffs = vals.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SlopeSeq(Seq::new(v.seq().offset(), diffs)?))
}

fn local_breakpoints(slopes: &[f64], tol: f64) -> Vec<usize> {
    let mut out = vec![0];
    let mut reference = match slopes.first() {
        Some(&s) => s,
        None => return out,
    };
    for (n, &s) in slopes.iter().enumerate().skip(1) {
        if s > reference + tol {
            out.push(n);
            reference = s;
        }
    }
    out
}

/// `n_0` = first index, then every index where the slope exceeds the slope at
/// the previous breakpoint by more than `tol`.
pub fn breakpoints(v: &Potential, tol: f64) -> Vec<i64> {
    let offset = v.seq().offset();
    let slopes = match slope_sequence(v) {
        Ok(s) => s.0.into_values(),
        Err(_) => return vec![offset],
    };
    local_breakpoints(&slopes, tol)
        .into_iter()
        .map(|i| offset + i as i64)
        .collect()
}

/// Directions produced by [`perturbation_basis`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBasis {
    pub directions: Vec<Seq>,
    /// The construction ran on the index-reversed sequence.
    pub reflected: bool,
}

/// `[p, p·V_0, …, p·V_k]` on a non-reflected local array.
fn lemma_directions(p: &[f64], v: &[f64], slopes: &[f64]) -> Vec<Vec<f64>> {
    let mut dirs = vec![p.to_vec()];
    for b in local_breakpoints(slopes, SLOPE_TOL) {
        let dir = (0..v.len())
            .map(|n| {
                let vi = if n <= b {
                    v[n]
                } else {
                    v[b] + slopes[b] * (n - b) as f64
                };
                p[n] * vi
            })
            .collect();
        dirs.push(dir);
    }
    dirs
}

/// Perturbation directions for a strictly positive log-concave sequence.
///
/// Returns `distinct slopes + 1` directions. If the first slope is zero the
/// construction runs on the reversed sequence; a constant potential gets
/// `{p, p·(n - offset)}`.
pub fn perturbation_basis(p: &Seq) -> Result<PerturbationBasis> {
    let potential = Potential::from_weights(p)?;
    let offset = p.offset();
    let pv = p.values();
    if pv.len() == 1 {
        return Ok(PerturbationBasis {
            directions: vec![p.clone()],
            reflected: false,
        });
    }
    let v = potential.seq().values();
    let slopes = slope_sequence(&potential)?.0.into_values();
    let first = slopes[0];
    let last = slopes[slopes.len() - 1];

    let to_seqs = |dirs: Vec<Vec<f64>>| -> Result<Vec<Seq>> {
        dirs.into_iter().map(|d| Seq::new(offset, d)).collect()
    };

    if first.abs() > SLOPE_TOL {
        return Ok(PerturbationBasis {
            directions: to_seqs(lemma_directions(pv, v, &slopes))?,
            reflected: false,
        });
    }
    if last.abs() <= SLOPE_TOL {
        // convex with zero slopes at both ends: constant
        let affine = pv.iter().enumerate().map(|(n, &x)| x * n as f64).collect();
        return Ok(PerturbationBasis {
            directions: to_seqs(vec![pv.to_vec(), affine])?,
            reflected: false,
        });
    }
    let rp: Vec<f64> = pv.iter().rev().copied().collect();
    let rv: Vec<f64> = v.iter().rev().copied().collect();
    let rslopes: Vec<f64> = rv.windows(2).map(|w| w[1] - w[0]).collect();
    let dirs = lemma_directions(&rp, &rv, &rslopes)
        .into_iter()
        .map(|mut d| {
            d.reverse();
            d
        })
        .collect();
    Ok(PerturbationBasis {
        directions: to_seqs(dirs)?,
        reflected: true,
    })
}

/// Number of singular values above `tol` after scaling each direction to unit max-entry.
pub fn numerical_rank(directions: &[Seq], tol: f64) -> usize {
    let Some(first) = directions.first() else {
        return 0;
    };
    let rows = first.len();
    let mut m = DMatrix::<f64>::zeros(rows, directions.len());
    for (j, d) in directions.iter().enumerate() {
        let scale = d.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if scale == 0.0 || d.len() != rows {
            continue;
        }
        for (i, v) in d.values().iter().enumerate() {
            m[(i, j)] = v / scale;
        }
    }
    m.singular_values().iter().filter(|&&s| s > tol).count()
}

/// Sampled evidence that a sequence admits `basis.len()` degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct DofCertificate {
    pub basis: Vec<Seq>,
    pub epsilon: f64,
    pub trials_checked: usize,
    pub reflected: bool,
}

/// Wire form: `{basis: [...], epsilon, trials, reflected}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofCertificateFile {
    pub basis: Vec<SeqFile>,
    pub epsilon: f64,
    pub trials: usize,
    pub reflected: bool,
}

impl DofCertificate {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn to_file(&self) -> DofCertificateFile {
        DofCertificateFile {
            basis: self
                .basis
                .iter()
                .map(|s| SeqFile::from_seq(s, SeqKind::Weights))
                .collect(),
            epsilon: self.epsilon,
            trials: self.trials_checked,
            reflected: self.reflected,
        }
    }

    /// Whether `p + Σ δ_j q_j` stays log-concave for the given draws.
    pub fn holds_for(&self, p: &Seq, unit_draws: &[Vec<f64>], epsilon: f64) -> bool {
        unit_draws.iter().all(|u| {
            let coeffs: Vec<f64> = u.iter().map(|x| epsilon * x).collect();
            perturbation_keeps_log_concavity(p, &self.basis, &coeffs)
        })
    }
}

fn perturbation_keeps_log_concavity(p: &Seq, basis: &[Seq], coeffs: &[f64]) -> bool {
    match p.perturbed(basis, coeffs) {
        Ok(q) => validate_log_concave(&q).is_ok_and(|r| r.is_log_concave),
        Err(_) => false,
    }
}

/// Points of the open cube `(-1, 1)^dim`, one per trial, derived from `seed`.
pub fn unit_cube_draws(dim: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..samples as u64)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(seed, t));
            (0..dim)
                .map(|_| 2.0 * rng.sample::<f64, _>(Open01) - 1.0)
                .collect()
        })
        .collect()
}

/// Support interval of a nonnegative sequence whose zeros sit at the edges.
fn positive_support(p: &Seq) -> Result<DiscreteInterval> {
    if let Some((n, v)) = p.iter().find(|&(_, v)| v < 0.0) {
        return Err(invalid!("negative entry {v} at index {n}"));
    }
    let hull = p
        .positive_hull()
        .ok_or_else(|| invalid!("sequence has no positive entry"))?;
    if let Some(n) = hull.iter().find(|&n| p.get(n) <= 0.0) {
        return Err(invalid!("interior zero at index {n}"));
    }
    Ok(hull)
}

/// Builds the perturbation basis on the support of `p`, checks its numerical
/// rank, and searches `ε = 1, 1/2, …, 2^-60` until `samples` draws from
/// `(-ε, ε)^b` all keep the sequence log-concave.
pub fn certify_dof(p: &Seq, samples: usize, seed: u64) -> Result<DofCertificate> {
    let support = positive_support(p)?;
    let core = p.restrict(support)?;
    let basis = perturbation_basis(&core)?;
    let rank = numerical_rank(&basis.directions, RANK_TOL);
    if rank != basis.directions.len() {
        return Err(Error::Degenerate(format!(
            "perturbation directions have numerical rank {rank} < {}",
            basis.directions.len()
        )));
    }
    let carrier = p.interval();
    let directions = basis
        .directions
        .iter()
        .map(|d| d.extend_to(carrier))
        .collect::<Result<Vec<_>>>()?;
    let cert = DofCertificate {
        basis: directions,
        epsilon: 1.0,
        trials_checked: samples,
        reflected: basis.reflected,
    };
    let draws = unit_cube_draws(cert.size(), samples, seed);
    let mut epsilon = 1.0f64;
    for _ in 0..=MAX_HALVINGS {
        if cert.holds_for(p, &draws, epsilon) {
            return Ok(DofCertificate { epsilon, ..cert });
        }
        epsilon *= 0.5;
    }
    Err(Error::NotCertified(format!(
        "no radius down to 2^-{MAX_HALVINGS} keeps all {samples} perturbations log-concave"
    )))
}

/// Linear constraints `⟨p, v_i⟩ = a_i` on a shared carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    vectors: Vec<Seq>,
    targets: Vec<f64>,
}

impl ConstraintSet {
    pub fn new(vectors: Vec<Seq>, targets: Vec<f64>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(invalid!("need at least one constraint"));
        }
        if vectors.len() != targets.len() {
            return Err(invalid!(
                "{} constraint vectors but {} targets",
                vectors.len(),
                targets.len()
            ));
        }
        let carrier = vectors[0].interval();
        if vectors.iter().any(|v| v.interval() != carrier) {
            return Err(invalid!("constraint vectors must share a carrier"));
        }
        Ok(Self { vectors, targets })
    }

    /// Constraints on `p(n) = μ(n)·n!` over `[0, support]` fixing total mass 1
    /// and mean `mean`: `v_1 = (1/n!)`, `v_2 = (0, 1/0!, …, 1/(L-1)!)`.
    pub fn unit_mass_and_mean(support: u64, mean: f64) -> Self {
        use crate::seqcore::numeric::ln_factorial;
        let mass = (0..=support).map(|n| (-ln_factorial(n)).exp()).collect();
        let first = (0..=support)
            .map(|n| if n == 0 { 0.0 } else { (-ln_factorial(n - 1)).exp() })
            .collect();
        Self::new(
            vec![Seq::new(0, mass).unwrap(), Seq::new(0, first).unwrap()],
            vec![1.0, mean],
        )
        .expect("well-formed constraints")
    }

    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Seq] {
        &self.vectors
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Fails unless `|⟨p, v_i⟩ - a_i| ≤ 1e-9·max(1, |a_i|)` for every `i`.
    pub fn check_feasible(&self, p: &Seq) -> Result<()> {
        for (i, (v, &a)) in self.vectors.iter().zip(&self.targets).enumerate() {
            let value = p.dot(v)?;
            if (value - a).abs() > 1e-9 * a.abs().max(1.0) {
                return Err(Error::Infeasible(format!(
                    "constraint {i}: <p, v> = {value}, target {a}"
                )));
            }
        }
        Ok(())
    }
}

/// Whether `p` can be an extreme point of the constrained set, i.e. its
/// certified degrees of freedom do not exceed the number of constraints.
pub fn is_extreme_candidate(p: &Seq, constraints: &ConstraintSet) -> Result<bool> {
    constraints.check_feasible(p)?;
    let cert = certify_dof(p, DEFAULT_SAMPLES, 0)?;
    Ok(cert.size() <= constraints.count())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn seq(v: &[f64]) -> Seq {
        Seq::new(0, v.to_vec()).unwrap()
    }

    fn potential(v: &[f64]) -> Potential {
        Potential::new(seq(v)).unwrap()
    }

    #[test]
    fn slopes() {
        let s = slope_sequence(&potential(&[0.0, LN2, 2.0 * LN2, 3.0 * LN2])).unwrap();
        assert_eq!(s.seq().len(), 3);
        assert!(s.seq().values().iter().all(|x| (x - LN2).abs() < 1e-15));
        let s = slope_sequence(&potential(&[0.0, 0.0, LN2, 2.0 * LN2])).unwrap();
        assert_eq!(s.seq().values(), &[0.0, LN2, LN2]);
        assert!(slope_sequence(&potential(&[1.0])).is_err());
    }

    #[test]
    fn poisson_weights_times_factorial_have_flat_potential() {
        // Pois(1) pmf times n! is the constant e^{-1}
        let p: Vec<f64> = (0..6).map(|_| (-1f64).exp()).collect();
        let s = slope_sequence(&Potential::from_weights(&seq(&p)).unwrap()).unwrap();
        assert!(s.seq().values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_non_convex_potential() {
        assert!(Potential::new(seq(&[0.0, 1.0, 0.0])).is_err());
        assert!(Potential::from_weights(&seq(&[1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn breakpoint_examples() {
        assert_eq!(breakpoints(&potential(&[0.0, LN2, 2.0 * LN2, 3.0 * LN2]), SLOPE_TOL), vec![0]);
        assert_eq!(breakpoints(&potential(&[0.0, 0.0, LN2, 2.0 * LN2]), SLOPE_TOL), vec![0, 1]);
        // slopes (-1, 0, 0, 2)
        assert_eq!(breakpoints(&potential(&[0.0, -1.0, -1.0, -1.0, 1.0]), SLOPE_TOL), vec![0, 1, 3]);
        let shifted = Potential::new(Seq::new(4, vec![0.0, -1.0, -1.0, -1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(breakpoints(&shifted, SLOPE_TOL), vec![4, 5, 7]);
    }

    #[test]
    fn geometric_basis() {
        let p = seq(&[1.0, 0.5, 0.25, 0.125]);
        let b = perturbation_basis(&p).unwrap();
        assert!(!b.reflected);
        assert_eq!(b.directions.len(), 2);
        assert_eq!(b.directions[0], p);
        for (n, v) in b.directions[1].iter() {
            assert!((v - p.get(n) * n as f64 * LN2).abs() < 1e-15);
        }
    }

    #[test]
    fn reflected_basis() {
        let p = seq(&[1.0, 1.0, 0.5, 0.25]);
        let b = perturbation_basis(&p).unwrap();
        assert!(b.reflected);
        assert_eq!(b.directions.len(), 3);
        assert_eq!(numerical_rank(&b.directions, RANK_TOL), 3);
    }

    #[test]
    fn constant_basis_falls_back_to_affine_direction() {
        let p = seq(&[1.0, 1.0, 1.0]);
        let b = perturbation_basis(&p).unwrap();
        assert!(!b.reflected);
        assert_eq!(b.directions[1].values(), &[0.0, 1.0, 2.0]);
        // e^{-V}(1 + δ n) is log-concave: (1+δn)^2 - (1+δ(n+1))(1+δ(n-1)) = δ^2
        for delta in [-0.3, -1e-6, 1e-6, 0.4] {
            let q = p.perturbed(&b.directions[1..], &[delta]).unwrap();
            assert!(validate_log_concave(&q).unwrap().is_log_concave);
        }
    }

    #[test]
    fn basis_rejects_non_positive() {
        assert!(perturbation_basis(&seq(&[1.0, 0.0, 1.0])).is_err());
        assert!(perturbation_basis(&seq(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn certificates() {
        let geo = certify_dof(&seq(&[1.0, 0.5, 0.25, 0.125]), 100, 1).unwrap();
        assert_eq!(geo.size(), 2);
        assert!(geo.epsilon >= 1e-3, "{}", geo.epsilon);
        let two = certify_dof(&seq(&[1.0, 1.0, 0.5, 0.25]), 100, 1).unwrap();
        assert_eq!(two.size(), 3);
        assert!(two.epsilon > 0.0);
        assert!(two.reflected);
    }

    #[test]
    fn certificate_with_affine_stretch() {
        // p(1)^2 = p(0)p(2) exactly, slope jump at n = 2
        let p = seq(&[1.0, 0.5, 0.25, 0.0625, 0.015625]);
        let c = certify_dof(&p, 100, 9).unwrap();
        assert_eq!(c.size(), 3);
        let half = unit_cube_draws(c.size(), 50, 1234);
        assert!(c.holds_for(&p, &half, c.epsilon / 2.0));
    }

    #[test]
    fn certificate_restricts_to_support() {
        let p = seq(&[0.0, 1.0, 0.5, 0.25, 0.0]);
        let c = certify_dof(&p, 50, 3).unwrap();
        assert_eq!(c.size(), 2);
        assert!(c.basis.iter().all(|d| d.len() == 5 && d.get(0) == 0.0 && d.get(4) == 0.0));
        assert!(certify_dof(&seq(&[1.0, 0.0, 1.0]), 10, 0).is_err());
    }

    #[test]
    fn certificate_wire_format() {
        let c = certify_dof(&seq(&[1.0, 0.5]), 10, 0).unwrap();
        let json = serde_json::to_value(c.to_file()).unwrap();
        assert_eq!(json["trials"], 10);
        assert_eq!(json["basis"][0]["kind"], "weights");
        assert!(json["epsilon"].as_f64().unwrap() > 0.0);
        assert_eq!(json["reflected"], false);
    }

    #[test]
    fn extreme_candidates() {
        let geo = seq(&[1.0, 0.5, 0.25, 0.125]);
        let mass = seq(&[1.0; 4]);
        let first = seq(&[0.0, 1.0, 2.0, 3.0]);
        let a1 = geo.dot(&mass).unwrap();
        let a2 = geo.dot(&first).unwrap();
        let c2 = ConstraintSet::new(vec![mass.clone(), first.clone()], vec![a1, a2]).unwrap();
        assert!(is_extreme_candidate(&geo, &c2).unwrap());

        let two = seq(&[1.0, 1.0, 0.5, 0.25]);
        let c = ConstraintSet::new(
            vec![mass.clone(), first.clone()],
            vec![two.dot(&mass).unwrap(), two.dot(&first).unwrap()],
        )
        .unwrap();
        assert!(!is_extreme_candidate(&two, &c).unwrap());

        // slopes (-1, 0, 1): three distinct values, four directions
        let three = seq(&[1.0, std::f64::consts::E, std::f64::consts::E, 1.0]);
        let sq = seq(&[0.0, 1.0, 4.0, 9.0]);
        let c3 = ConstraintSet::new(
            vec![mass.clone(), first.clone(), sq.clone()],
            vec![
                three.dot(&mass).unwrap(),
                three.dot(&first).unwrap(),
                three.dot(&sq).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(certify_dof(&three, 100, 0).unwrap().size(), 4);
        assert!(!is_extreme_candidate(&three, &c3).unwrap());

        let off = ConstraintSet::new(vec![mass], vec![a1 + 1.0]).unwrap();
        assert!(matches!(is_extreme_candidate(&geo, &off), Err(Error::Infeasible(_))));
    }

    #[test]
    fn constraint_set_validation() {
        assert!(ConstraintSet::new(vec![], vec![]).is_err());
        assert!(ConstraintSet::new(vec![seq(&[1.0])], vec![]).is_err());
        assert!(ConstraintSet::new(vec![seq(&[1.0]), seq(&[1.0, 2.0])], vec![0.0, 0.0]).is_err());
    }
}
