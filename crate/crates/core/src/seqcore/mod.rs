//! Sequences, pmfs, and (ultra-)log-concavity.

mod logconcave;
pub mod numeric;
mod pmf;
mod seq;

pub use logconcave::{
    is_ulc_finite, is_ulc_inf, report_from_logs, ulc_finite_report, ulc_inf_report,
    validate_log_concave, LogConcavityReport, LOG_CONCAVITY_RTOL,
};
pub use pmf::{
    convolve, ln_reference_pmf, poisson_tail, reference_pmf, tilt, tilt_log, Pmf, Reference,
    NORMALIZATION_TOL,
};
pub use seq::{format_f64, DiscreteInterval, Seq, SeqFile, SeqKind};
