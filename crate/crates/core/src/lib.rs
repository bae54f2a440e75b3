//! Ultra-log-concave sequences and the discrete degrees-of-freedom method.
//!
//! * [`seqcore`]: sequences, pmfs, (ultra-)log-concavity predicates,
//!   convolution and exponential tilting.
//! * [`freedom`]: potentials, slope sequences, perturbation bases and
//!   sampled degree-of-freedom certificates.
//! * [`extremal`]: the truncated exponential family and the minimization of
//!   `P(X = E X)` under a fixed integral mean.
//! * [`oracle`]: seeded generators and brute-force checks.

pub mod error;
pub mod extremal;
pub mod freedom;
pub mod oracle;
pub mod seqcore;

pub use error::{Error, Result};
pub use extremal::{
    family_profile, find_psi_zero, minimize_prob_at_mean, solve_mean, verify_h_nonneg,
    ExtremalResult, FamilyProfile, HProfileReport, MeanSolution, TruncExpFamily,
};
pub use freedom::{
    breakpoints, certify_dof, is_extreme_candidate, perturbation_basis, slope_sequence,
    ConstraintSet, DofCertificate, Potential, SlopeSeq,
};
pub use oracle::{
    property_suite, run_theorem_trials, sample_ulc, tilt_to_mean, PropertyReport, TrialConfig,
    TrialReport,
};
pub use seqcore::{
    convolve, is_ulc_finite, is_ulc_inf, reference_pmf, tilt, validate_log_concave,
    DiscreteInterval, LogConcavityReport, Pmf, Reference, Seq, SeqFile, SeqKind,
};
